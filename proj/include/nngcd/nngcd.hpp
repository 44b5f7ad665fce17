#ifndef NNGCD_NNGCD_HPP
#define NNGCD_NNGCD_HPP

#include "nngcd/activations.hpp"
#include "nngcd/clustering.hpp"
#include "nngcd/cooccurrence.hpp"
#include "nngcd/data.hpp"
#include "nngcd/encoder.hpp"
#include "nngcd/errors.hpp"
#include "nngcd/io.hpp"
#include "nngcd/losses.hpp"
#include "nngcd/matrix.hpp"
#include "nngcd/snmf.hpp"
#include "nngcd/training.hpp"
#include "nngcd/verify.hpp"

#endif  // NNGCD_NNGCD_HPP
