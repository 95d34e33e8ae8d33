#include "mmic/simulation.hpp"

#include "mmic/adam.hpp"
#include "mmic/errors.hpp"
#include "mmic/evaluation.hpp"
#include "mmic/pps.hpp"
#include "mmic/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

namespace mmic {

const char* to_string(Algorithm a) {
    switch (a) {
    case Algorithm::mmic: return "mmic";
    case Algorithm::fedavg: return "fedavg";
    case Algorithm::fedadagrad: return "fedadagrad";
    }
    return "?";
}

const char* to_string(ClusteringBackend b) {
    switch (b) {
    case ClusteringBackend::lsh_kmeans: return "lsh_kmeans";
    case ClusteringBackend::svd_hierarchical: return "svd_hierarchical";
    }
    return "?";
}

ModelSpec SimConfig::model_spec() const {
    return ModelSpec{data.dim_a, data.dim_b, hidden, data.classes, Activation::tanh};
}

std::vector<double> SimConfig::resolved_sweep() const {
    if (!sweep.empty()) return sweep;
    std::vector<double> out;
    if (backend == ClusteringBackend::lsh_kmeans) {
        const std::size_t hi = std::min<std::size_t>(10, data.clients / 3);
        if (hi < 2) out.push_back(static_cast<double>(std::min<std::size_t>(2, data.clients)));
        for (std::size_t k = 2; k <= hi; ++k) out.push_back(static_cast<double>(k));
    } else {
        for (int i = 1; i <= 19; ++i) out.push_back(0.05 * i);
    }
    return out;
}

std::vector<std::string> SimConfig::problems() const {
    std::vector<std::string> p;
    auto need = [&](bool ok, std::string msg) {
        if (!ok) p.push_back(std::move(msg));
    };
    need(data.clients >= 1, "data.clients must be >= 1");
    need(data.dirichlet_beta > 0.0, "data.dirichlet_beta must be > 0");
    need(data.classes >= 2, "data.classes must be >= 2");
    need(data.dim_a >= 1, "data.dim_a must be >= 1");
    need(data.dim_b >= 1, "data.dim_b must be >= 1");
    need(data.samples_per_class >= 1, "data.samples_per_class must be >= 1");
    need(data.mm >= 0.0 && data.mm <= 1.0, "data.mm must be in [0, 1]");
    need(data.mc >= 0.0 && data.mc <= 1.0, "data.mc must be in [0, 1]");
    need(data.prototype_scale >= 0.0, "data.prototype_scale must be >= 0");
    need(data.noise_sigma > 0.0, "data.noise_sigma must be > 0");
    need(data.local_test_fraction >= 0.0 && data.local_test_fraction < 1.0, "data.local_test_fraction must be in [0, 1)");
    need(data.global_test_fraction > 0.0 && data.global_test_fraction < 1.0, "data.global_test_fraction must be in (0, 1)");
    need(data.group_shift >= 0.0, "data.group_shift must be >= 0");
    need(hidden >= 1, "model.hidden must be >= 1");
    need(rounds >= 1, "run.rounds must be >= 1");
    need(warmup_rounds <= rounds, "run.warmup_rounds must be <= run.rounds");
    need(participation > 0.0 && participation <= 1.0, "train.participation must be in (0, 1]");
    need(batch_size >= 1, "train.batch_size must be >= 1");
    need(local_epochs >= 1, "train.local_epochs must be >= 1");
    need(subset_size >= 1, "train.subset_size must be >= 1");
    need(client_lr > 0.0, "train.lr must be > 0");
    need(server.lr > 0.0, "server.lr must be > 0");
    need(server.beta >= 0.0 && server.beta < 1.0, "server.beta must be in [0, 1)");
    need(server.tau_a > 0.0, "server.tau_a must be > 0");
    need(server.tau_s > 0.0, "mpo.tau_s must be > 0");
    need(!(server.tau_s > 0.0) || server.beta + 1.0 / server.tau_s <= 1.0, "server.beta + 1/mpo.tau_s must be <= 1");
    need(lambda >= 0.0 && lambda <= 1.0, "mpo.lambda must be in [0, 1]");
    need(selection_tau > 0.0, "selection.tau must be > 0");
    need(lsh_planes >= 1, "clustering.lsh_planes must be >= 1");
    need(svd_rank >= 1, "clustering.svd_rank must be >= 1");
    for (double s : sweep) {
        if (backend == ClusteringBackend::lsh_kmeans)
            need(s >= 1.0 && s == std::floor(s), "clustering.sweep entries must be positive integers for lsh_kmeans");
        else
            need(s >= 0.0, "clustering.sweep thresholds must be >= 0");
    }
    need(threads >= 0, "run.threads must be >= 0");
    return p;
}

void SimConfig::validate() const {
    const auto p = problems();
    if (p.empty()) return;
    std::string msg = "invalid configuration:";
    for (const auto& s : p) msg += "\n  " + s;
    throw ConfigError(msg);
}

SimSetup prepare_setup(const SimConfig& cfg, const std::optional<ClusterAssignment>& forced) {
    cfg.validate();
    const auto& spec = cfg.data;
    SimSetup s;

    const SamplePool pool = gen_synthetic(spec);
    auto [held, rest] = split_holdout(pool, spec.global_test_fraction, spec.data_seed);
    s.global_test = std::move(held);
    s.clients = dirichlet_partition(rest, spec.clients, spec.dirichlet_beta, spec.partition_seed, spec.min_samples);
    split_local_test(s.clients, spec.local_test_fraction, spec.partition_seed);
    apply_group_shift(s.clients, s.global_test, spec);
    designate_missing(s.clients, spec.mm, cfg.stochastic_activation ? 1.0 : spec.mc, spec.missing_seed);

    double total = 0.0;
    for (const auto& c : s.clients) total += static_cast<double>(c.n());
    for (const auto& c : s.clients) s.client_weights.push_back(static_cast<double>(c.n()) / total);

    if (forced) {
        if (forced->labels.size() != s.clients.size()) throw ConfigError("forced assignment does not cover every client");
        s.clustering.assignment = *forced;
        s.clustering.chosen_parameter = static_cast<double>(forced->clusters);
    } else if (cfg.backend == ClusteringBackend::lsh_kmeans) {
        std::vector<Point> desc;
        for (const auto& c : s.clients) desc.push_back(client_descriptor(c, spec.classes).vector);
        // centre so the random hyperplanes through the origin split the client population
        Point mean(desc.front().size(), 0.0);
        for (const auto& d : desc)
            for (std::size_t j = 0; j < d.size(); ++j) mean[j] += d[j] / static_cast<double>(desc.size());
        for (auto& d : desc)
            for (std::size_t j = 0; j < d.size(); ++j) d[j] -= mean[j];
        const auto planes = random_hyperplanes(cfg.lsh_planes, desc.front().size(), cfg.clustering_seed);
        std::vector<Point> sketches;
        for (const auto& d : desc) {
            const auto sk = lsh_sketch(d, planes);
            sketches.emplace_back(sk.begin(), sk.end());
        }
        std::vector<std::size_t> ks;
        for (double k : cfg.resolved_sweep()) ks.push_back(static_cast<std::size_t>(k));
        if (s.clients.size() == 1) ks = {1};
        s.clustering = select_clustering(sketches, ks, cfg.clustering_seed, 100, cfg.exec);
    } else {
        std::vector<SampleMatrix> mats;
        for (const auto& c : s.clients) mats.push_back(client_matrix(c));
        const auto dist = subspace_distances(mats, cfg.svd_rank, cfg.exec);
        const auto sweep = cfg.resolved_sweep();
        s.clustering = select_clustering(dist, sweep, cfg.exec);
    }

    s.members = s.clustering.assignment.members();
    s.cluster_weights.assign(s.members.size(), 0.0);
    s.cluster_tests.assign(s.members.size(), {});
    for (std::size_t m = 0; m < s.members.size(); ++m) {
        for (auto k : s.members[m]) {
            s.cluster_weights[m] += s.client_weights[k];
            const auto& t = s.clients[k].test;
            s.cluster_tests[m].insert(s.cluster_tests[m].end(), t.begin(), t.end());
        }
        if (s.members[m].empty()) throw ContractError("clustering produced an empty cluster");
    }
    // cluster weights must sum to one exactly enough for global_aggregate
    const double wsum = std::accumulate(s.cluster_weights.begin(), s.cluster_weights.end(), 0.0);
    for (auto& w : s.cluster_weights) w /= wsum;
    return s;
}

namespace {

struct LocalOutcome {
    ModelParams model;
    PovertyReport poverty;
    bool saw_missing = false;
    std::size_t subset = 0;
    std::size_t trained = 0;
    double missing_rate = 0.0;
};

LocalOutcome train_client(const SimConfig& cfg, const ClientDataset& client, const ModelParams& start,
                          std::size_t round, bool activate) {
    LocalOutcome out;
    out.model = start;
    AdamState adam = AdamState::for_model(out.model);
    std::vector<ChangeTracker> trackers(cfg.local_epochs);
    const bool track = cfg.pps_enabled();
    for (std::size_t e = 0; e < cfg.local_epochs; ++e) {
        const RoundBatches rb = batch_iter(client, cfg.subset_size, cfg.batch_size, round, e, cfg.training_seed, activate);
        if (e == 0) {
            out.subset = rb.subset_size;
            out.missing_rate = rb.missing_rate();
        }
        for (const auto& batch : rb.batches) {
            const LossGrad lg = forward_loss_grad(out.model, batch);
            adam_step(out.model, lg.grads, adam, cfg.client_lr);
            out.trained += batch.size();
            out.saw_missing = out.saw_missing || batch.has_missing;
            if (track) observe_batch(trackers[e], batch.has_missing, relative_change_from_adam(adam, out.model, cfg.client_lr));
        }
    }
    if (track) {
        out.poverty = poverty_layer(trackers);
        out.poverty.client = client.id;
        out.poverty.round = round;
    }
    return out;
}

} // namespace

SimResult run_simulation(const SimConfig& cfg, const RoundCallback& on_round,
                         const std::optional<ClusterAssignment>& forced) {
    if (cfg.threads > 0) set_parallel_threads(cfg.threads);
    SimResult res;
    res.setup = prepare_setup(cfg, forced);
    const SimSetup& S = res.setup;
    const std::size_t K = S.clients.size();
    const std::size_t M = S.members.size();

    res.global = init_model(cfg.model_spec(), cfg.model_seed);
    res.client_models.assign(K, res.global);

    SelectionLedger ledger(K, M);
    RiskTracker risk_tracker(K);
    GlobalOptState opt = GlobalOptState::create(res.global, M, cfg.server);

    for (std::size_t t = 1; t <= cfg.rounds; ++t) {
        const auto t0 = std::chrono::steady_clock::now();
        MetricsRecord rec;
        rec.round = t;
        rec.clusters.resize(M);

        // 1. selection per cluster
        for (std::size_t m = 0; m < M; ++m) {
            ClusterRound& cr = rec.clusters[m];
            cr.cluster = m;
            cr.members = S.members[m];
            const std::size_t n = cr.members.size();
            if (cfg.bpi_enabled() && t > cfg.warmup_rounds)
                cr.probabilities = selection_probabilities(ledger, cr.members, cfg.selection_tau);
            else
                cr.probabilities.assign(n, 1.0 / static_cast<double>(n));
            Rng rng = make_rng(cfg.selection_seed, {11, t, m});
            for (auto pos : sample_clients(cr.probabilities, selection_count(n, cfg.participation), rng))
                cr.selected.push_back(cr.members[pos]);
            rec.selected.insert(rec.selected.end(), cr.selected.begin(), cr.selected.end());
        }
        std::sort(rec.selected.begin(), rec.selected.end());

        // 2. local training, one task per selected client
        std::vector<LocalOutcome> outcomes(rec.selected.size());
        std::vector<char> activate(rec.selected.size(), 0);
        for (std::size_t i = 0; i < rec.selected.size(); ++i) {
            const auto& c = S.clients[rec.selected[i]];
            if (!c.missing_designated) continue;
            if (cfg.stochastic_activation) {
                Rng coin = make_rng(cfg.data.missing_seed, {12, c.id, t});
                activate[i] = std::bernoulli_distribution(cfg.data.mc)(coin) ? 1 : 0;
            } else {
                activate[i] = 1;
            }
        }
        for_each_index(cfg.exec, rec.selected.size(), [&](std::size_t i) {
            outcomes[i] = train_client(cfg, S.clients[rec.selected[i]], res.global, t, activate[i] != 0);
        });
        auto outcome_of = [&](std::size_t client) -> LocalOutcome& {
            const auto it = std::lower_bound(rec.selected.begin(), rec.selected.end(), client);
            return outcomes[static_cast<std::size_t>(it - rec.selected.begin())];
        };
        for (std::size_t i = 0; i < outcomes.size(); ++i) {
            rec.subset_samples += outcomes[i].subset;
            rec.trained_samples += outcomes[i].trained;
            rec.missing_rates.push_back(outcomes[i].missing_rate);
        }

        // 3. poverty substitution inside each cluster
        if (cfg.pps_enabled()) {
            for (std::size_t m = 0; m < M; ++m) {
                ClusterRound& cr = rec.clusters[m];
                std::vector<PovertyTarget> targets;
                std::vector<Donor> donors;
                std::vector<std::size_t> target_clients;
                for (auto k : cr.selected) {
                    LocalOutcome& o = outcome_of(k);
                    if (o.poverty.layer) {
                        targets.push_back({&o.model, *o.poverty.layer});
                        target_clients.push_back(k);
                    } else if (!o.saw_missing) {
                        donors.push_back({&o.model, static_cast<double>(S.clients[k].n())});
                    }
                }
                const bool applied = targets.empty() ? true : substitute(targets, donors);
                cr.substitution_skipped = !targets.empty() && !applied;
                for (auto k : target_clients) {
                    const auto& o = outcome_of(k);
                    rec.poverty.push_back({k, m, *o.poverty.layer, o.poverty.rates.at(*o.poverty.layer), applied});
                }
            }
        }
        for (auto k : rec.selected) res.client_models[k] = outcome_of(k).model;

        // 4. cluster FedAvg and per-client returns on the cluster test set
        std::vector<ModelParams> cluster_models(M);
        std::vector<double> metric(rec.selected.size(), 0.0);
        std::vector<std::size_t> cluster_of(K, 0);
        for (std::size_t m = 0; m < M; ++m)
            for (auto k : S.members[m]) cluster_of[k] = m;
        for_each_index(cfg.exec, rec.selected.size(), [&](std::size_t i) {
            const auto k = rec.selected[i];
            metric[i] = evaluate_model(res.client_models[k], S.cluster_tests[cluster_of[k]]).accuracy;
        });

        std::vector<std::pair<std::size_t, double>> round_returns;
        for (std::size_t m = 0; m < M; ++m) {
            ClusterRound& cr = rec.clusters[m];
            std::vector<const ModelParams*> models;
            std::vector<double> sizes;
            std::vector<double> weights;
            for (auto k : cr.selected) {
                models.push_back(&res.client_models[k]);
                sizes.push_back(static_cast<double>(S.clients[k].n()));
                weights.push_back(S.client_weights[k]);
                const auto pos = static_cast<std::size_t>(
                    std::lower_bound(rec.selected.begin(), rec.selected.end(), k) - rec.selected.begin());
                const double alpha = ledger.record_metric(k, t, metric[pos]);
                cr.returns.push_back(alpha);
                round_returns.emplace_back(k, alpha);
            }
            cluster_models[m] = fedavg(std::span<const ModelParams* const>(models), sizes);

            cr.cluster_return = coalition_return(weights, cr.returns);
            cr.threshold = ledger.threshold(m, cfg.threshold);
            for (auto pos : identify_core_members(weights, cr.returns, cr.threshold)) cr.core.push_back(cr.selected[pos]);
            ledger.update_counters(cr.selected, cr.core);
            ledger.record_cluster_return(m, cr.cluster_return);
        }
        std::sort(round_returns.begin(), round_returns.end());
        risk_tracker.record_round(t, round_returns);

        // 5. risk, RARC and global aggregation
        std::vector<double> rarcs(M, 0.0);
        for (std::size_t m = 0; m < M; ++m) {
            ClusterRound& cr = rec.clusters[m];
            std::vector<double> weights;
            for (auto k : cr.selected) weights.push_back(S.client_weights[k]);
            if (cfg.risk_path == RiskPath::prefix) {
                cr.risk = risk_tracker.risk(cr.selected, weights, t);
            } else {
                std::vector<ReturnSeries> hist;
                for (auto k : cr.selected) hist.emplace_back(ledger.entry(k).returns);
                std::vector<const ReturnSeries*> ptrs;
                for (const auto& h : hist) ptrs.push_back(&h);
                cr.risk = cluster_risk(ptrs, weights, t);
            }
            cr.rarc = rarc(cr.risk, cr.cluster_return, cfg.lambda);
            rarcs[m] = cfg.mpo_enabled() ? cr.rarc : 0.0;
        }
        std::vector<const ModelParams*> cptrs;
        for (const auto& cm : cluster_models) cptrs.push_back(&cm);
        if (cfg.algorithm == Algorithm::fedavg) {
            res.global = fedavg(std::span<const ModelParams* const>(cptrs), S.cluster_weights);
            for (auto& cr : rec.clusters) cr.beta_star = cfg.server.beta;
        } else {
            const auto beta_star = global_aggregate(opt, res.global, cptrs, S.cluster_weights, rarcs);
            for (std::size_t m = 0; m < M; ++m) rec.clusters[m].beta_star = beta_star[m];
        }
        if (!res.global.all_finite()) throw NumericError("global model became non-finite in round " + std::to_string(t));

        // 6. evaluation
        const auto g = evaluate_global(res.global, S.global_test, cfg.exec);
        rec.global_accuracy = g.accuracy;
        rec.global_f1 = g.macro_f1;
        std::vector<double> acc(K, 0.0);
        std::vector<double> f1(K, 0.0);
        std::vector<double> w(K, 0.0);
        for_each_index(cfg.exec, K, [&](std::size_t k) {
            if (S.clients[k].test.empty()) return;
            const auto r = evaluate_model(res.client_models[k], S.clients[k].test);
            acc[k] = r.accuracy;
            f1[k] = r.macro_f1;
            w[k] = S.client_weights[k];
        });
        rec.personalized_accuracy = evaluate_personalized(acc, w);
        rec.personalized_f1 = evaluate_personalized(f1, w);
        rec.selected_counts = ledger.selected_counts();
        rec.core_counts = ledger.core_counts();
        rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        if (on_round) on_round(rec);
        res.records.push_back(std::move(rec));
    }
    return res;
}

} // namespace mmic
