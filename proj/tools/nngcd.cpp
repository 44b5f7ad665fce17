// Command-line front end: synth, train, cluster, snmf, verify, metrics, emit-matrix.
//
// Exit codes: 0 success, 1 validation error, 2 numeric failure.

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "nngcd/nngcd.hpp"

namespace {

using nlohmann::json;
using namespace nngcd;

void emit(const std::string& path, const json& report) {
    if (path.empty()) {
        std::cout << report.dump(2) << '\n';
    } else {
        io::save_report(path, report);
    }
}

json acc_json(const AccReport& r) {
    return {{"acc_all", r.acc_all},
            {"acc_old", optional_json(r.acc_old)},
            {"acc_new", optional_json(r.acc_new)},
            {"permutation", r.permutation}};
}

json diagnostics_json(const BlockDiagnostics& d) {
    return {{"intra_base_sparsity", optional_json(d.intra_base_sparsity)},
            {"intra_novel_sparsity", optional_json(d.intra_novel_sparsity)},
            {"insulation_mean", optional_json(d.insulation_mean)}};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Non-negative contrastive clustering toolkit"};
    app.require_subcommand(1);

    // synth
    SynthOptions synth_opts;
    std::string synth_data = "data.csv", synth_labels = "labels.csv", synth_masks = "masks.csv";
    auto* synth = app.add_subcommand("synth", "Generate a synthetic GCD dataset of Gaussian blobs");
    synth->add_option("--k-old", synth_opts.K_old, "Base classes")->capture_default_str();
    synth->add_option("--k-new", synth_opts.K_new, "Novel classes")->capture_default_str();
    synth->add_option("--per-class", synth_opts.per_class, "Samples per class")->capture_default_str();
    synth->add_option("--dim", synth_opts.dim, "Feature dimension")->capture_default_str();
    synth->add_option("--separation", synth_opts.separation, "Minimum center distance")->capture_default_str();
    synth->add_option("--shared-offset", synth_opts.shared_offset, "Length of a direction shared by all centers")
        ->capture_default_str();
    synth->add_option("--label-fraction", synth_opts.label_fraction, "Labeled fraction of base classes")
        ->capture_default_str();
    synth->add_option("--seed", synth_opts.seed)->capture_default_str();
    synth->add_option("--data", synth_data, "Output feature CSV")->capture_default_str();
    synth->add_option("--labels", synth_labels, "Output label CSV")->capture_default_str();
    synth->add_option("--masks", synth_masks, "Output mask CSV (old, labeled)")->capture_default_str();

    // train
    std::string train_data, train_labels, train_masks, train_config, train_out, train_report;
    auto* train_cmd = app.add_subcommand("train", "Train the encoder on a GCD dataset");
    train_cmd->add_option("--data", train_data)->required();
    train_cmd->add_option("--labels", train_labels)->required();
    train_cmd->add_option("--masks", train_masks)->required();
    train_cmd->add_option("--config", train_config, "Flat JSON config (optional)");
    train_cmd->add_option("--out", train_out, "Checkpoint JSON")->required();
    train_cmd->add_option("--report", train_report, "Report JSON");

    // cluster
    std::string cl_features, cl_labels, cl_mask, cl_report, cl_assign;
    std::size_t cl_k = 0, cl_restarts = 10;
    std::uint64_t cl_seed = 0;
    bool cl_kernel = false;
    auto* cluster = app.add_subcommand("cluster", "K-means on feature rows and ACC against labels");
    cluster->add_option("--features", cl_features)->required();
    cluster->add_option("--k", cl_k)->required();
    cluster->add_option("--labels", cl_labels)->required();
    cluster->add_option("--old-mask", cl_mask, "0/1 per sample (first column)")->required();
    cluster->add_option("--report", cl_report);
    cluster->add_option("--assignments", cl_assign, "Write predicted cluster ids");
    cluster->add_option("--restarts", cl_restarts)->capture_default_str();
    cluster->add_option("--seed", cl_seed)->capture_default_str();
    cluster->add_flag("--kernel", cl_kernel, "Run kernel K-means on the Gram matrix X X^T instead");

    // snmf
    std::string sn_input, sn_out, sn_history;
    std::size_t sn_rank = 0;
    SnmfOptions sn_opts;
    auto* snmf = app.add_subcommand("snmf", "Symmetric NMF of a CSV matrix");
    snmf->add_option("--input", sn_input)->required();
    snmf->add_option("--rank", sn_rank)->required();
    snmf->add_option("--seed", sn_opts.seed)->capture_default_str();
    snmf->add_option("--max-iters", sn_opts.max_iters)->capture_default_str();
    snmf->add_option("--tol", sn_opts.tol)->capture_default_str();
    snmf->add_option("--damping", sn_opts.damping)->capture_default_str();
    snmf->add_option("--out", sn_out, "Factor H CSV")->required();
    snmf->add_option("--history", sn_history, "Objective history CSV");

    // verify
    auto* verify = app.add_subcommand("verify", "Numerical checks of the equivalence results");
    verify->require_subcommand(1);
    std::size_t t1_n = 12, t1_k = 3, t1_trials = 100;
    std::uint64_t t1_seed = 0;
    std::string t1_report;
    auto* theorem1 = verify->add_subcommand("theorem1", "Kernel K-means vs SNMF identities");
    theorem1->add_option("--n", t1_n)->capture_default_str();
    theorem1->add_option("--k", t1_k)->capture_default_str();
    theorem1->add_option("--trials", t1_trials)->capture_default_str();
    theorem1->add_option("--seed", t1_seed)->capture_default_str();
    theorem1->add_option("--report", t1_report);

    std::string t2_preset, t2_kernel, t2_prior, t2_report;
    std::size_t t2_dim = 4, t2_trials = 100;
    std::uint64_t t2_seed = 0;
    auto* theorem2 = verify->add_subcommand("theorem2", "SNMF on the normalized co-occurrence vs NCL");
    auto* preset_opt = theorem2->add_option("--graph", t2_preset,
                                            "uniform-pair | two-block(n,p_in,p_out) | random(n_aug,n_nat,seed)");
    auto* kernel_opt = theorem2->add_option("--kernel", t2_kernel, "Augmentation kernel CSV (views x naturals)");
    auto* prior_opt = theorem2->add_option("--prior", t2_prior, "Natural prior CSV (one row or one column)");
    kernel_opt->needs(prior_opt);
    prior_opt->needs(kernel_opt);
    preset_opt->excludes(kernel_opt);
    theorem2->add_option("--dim", t2_dim)->capture_default_str();
    theorem2->add_option("--trials", t2_trials)->capture_default_str();
    theorem2->add_option("--seed", t2_seed)->capture_default_str();
    theorem2->add_option("--report", t2_report);

    // metrics
    std::string mt_sim, mt_mask, mt_report;
    double mt_threshold = 0.05;
    auto* metrics = app.add_subcommand("metrics", "Intra-class sparsity and base-novel insulation of a matrix");
    metrics->add_option("--similarity", mt_sim)->required();
    metrics->add_option("--old-mask", mt_mask)->required();
    metrics->add_option("--threshold", mt_threshold)->capture_default_str();
    metrics->add_option("--report", mt_report);

    // emit-matrix
    std::string em_features, em_out;
    auto* emit_matrix = app.add_subcommand("emit-matrix", "Cosine similarity matrix of feature rows");
    emit_matrix->add_option("--features", em_features)->required();
    emit_matrix->add_option("--out", em_out)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*synth) {
            const GcdDataset d = synth_gcd(synth_opts);
            save_dataset(d, synth_data, synth_labels, synth_masks);
        } else if (*train_cmd) {
            const GcdDataset d = load_dataset(train_data, train_labels, train_masks);
            const TrainConfig cfg = train_config_from_json(train_config.empty() ? json::object()
                                                                                : io::load_json(train_config));
            const TrainResult r = train(d, cfg);
            io::save_report(train_out, to_json(r.params));
            json report = to_json(r.report);
            report["config"] = to_json(cfg);
            emit(train_report, report);
        } else if (*cluster) {
            const DenseMatrix X = io::load_features(cl_features);
            const auto y = io::load_labels(cl_labels);
            const auto mask = io::load_mask(cl_mask);
            require(y.size() == X.rows() && mask.size() == X.rows(), "cluster: labels and mask must match features");
            const ClusteringResult c =
                cl_kernel ? kernel_kmeans(matmul_nt(X, X), cl_k, cl_restarts, cl_seed) : kmeans(X, cl_k, cl_restarts, cl_seed);
            json report = acc_json(acc(y, c.assignment.labels, mask));
            report["loss"] = c.loss;
            report["k"] = cl_k;
            if (!cl_assign.empty()) io::save_labels(cl_assign, c.assignment.labels, "cluster");
            emit(cl_report, report);
        } else if (*snmf) {
            const DenseMatrix V = io::load_matrix(sn_input);
            const SnmfResult r = snmf_solve(V, sn_rank, sn_opts);
            io::save_matrix(sn_out, r.factor.H);
            if (!sn_history.empty())
                io::save_matrix(sn_history, DenseMatrix(r.objective_history.size(), 1, r.objective_history), "objective");
            emit("", {{"iterations", r.iterations},
                      {"converged", r.converged},
                      {"objective", r.objective_history.back()},
                      {"orthogonality_residual", orthogonality_residual(r.factor.H)}});
        } else if (*theorem1) {
            const Theorem1Report r = verify_theorem1(t1_n, t1_k, t1_seed, t1_trials);
            emit(t1_report, to_json(r));
            return r.passed ? 0 : 2;
        } else if (*theorem2) {
            AugmentationModel model;
            if (!t2_kernel.empty()) {
                model.kernel = io::load_matrix(t2_kernel);
                const DenseMatrix prior = io::load_matrix(t2_prior);
                model.natural_prior.assign(prior.values().begin(), prior.values().end());
            } else {
                model = parse_graph_preset(t2_preset.empty() ? "two-block(6,0.8,0.2)" : t2_preset);
            }
            const Theorem2Report r = verify_theorem2(model, t2_dim, t2_trials, t2_seed);
            emit(t2_report, to_json(r));
            return r.passed ? 0 : 2;
        } else if (*metrics) {
            const DenseMatrix S = io::load_matrix(mt_sim);
            const auto mask = io::load_mask(mt_mask);
            emit(mt_report, diagnostics_json(block_diagnostics(S, mask, mt_threshold)));
        } else if (*emit_matrix) {
            io::save_matrix(em_out, similarity_matrix(io::load_features(em_features)));
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
