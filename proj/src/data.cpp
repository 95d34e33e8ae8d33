#include "mmic/data.hpp"

#include "mmic/errors.hpp"
#include "mmic/rng.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

namespace mmic {

void PartitionSpec::validate() const {
    std::vector<std::string> bad;
    if (clients < 1) bad.emplace_back("clients must be >= 1");
    if (!(dirichlet_beta > 0.0)) bad.emplace_back("dirichlet_beta must be > 0");
    if (classes < 2) bad.emplace_back("classes must be >= 2");
    if (dim_a < 1 || dim_b < 1) bad.emplace_back("dim_a and dim_b must be >= 1");
    if (samples_per_class < 1) bad.emplace_back("samples_per_class must be >= 1");
    if (!(mm >= 0.0 && mm <= 1.0)) bad.emplace_back("mm must be in [0, 1]");
    if (!(mc >= 0.0 && mc <= 1.0)) bad.emplace_back("mc must be in [0, 1]");
    if (!(noise_sigma > 0.0)) bad.emplace_back("noise_sigma must be > 0");
    if (!(prototype_scale >= 0.0)) bad.emplace_back("prototype_scale must be >= 0");
    if (!(local_test_fraction >= 0.0 && local_test_fraction < 1.0)) bad.emplace_back("local_test_fraction must be in [0, 1)");
    if (!(global_test_fraction > 0.0 && global_test_fraction < 1.0)) bad.emplace_back("global_test_fraction must be in (0, 1)");
    if (!bad.empty()) {
        std::string msg = "invalid partition spec:";
        for (const auto& b : bad) msg += " " + b + ";";
        throw ConfigError(msg);
    }
}

SamplePool gen_synthetic(const PartitionSpec& spec) {
    spec.validate();
    Rng proto_rng = make_rng(spec.data_seed, {1});
    Rng noise_rng = make_rng(spec.data_seed, {2});
    std::normal_distribution<double> proto(0.0, spec.prototype_scale);
    std::normal_distribution<double> noise(0.0, spec.noise_sigma);

    std::vector<std::vector<double>> mu_a(spec.classes, std::vector<double>(spec.dim_a));
    std::vector<std::vector<double>> mu_b(spec.classes, std::vector<double>(spec.dim_b));
    for (std::size_t c = 0; c < spec.classes; ++c) {
        for (auto& x : mu_a[c]) x = proto(proto_rng);
        for (auto& x : mu_b[c]) x = proto(proto_rng);
    }

    SamplePool pool{spec.dim_a, spec.dim_b, spec.classes, {}};
    pool.samples.reserve(spec.classes * spec.samples_per_class);
    for (std::size_t c = 0; c < spec.classes; ++c) {
        for (std::size_t i = 0; i < spec.samples_per_class; ++i) {
            Sample s;
            s.label = static_cast<int>(c);
            s.xa.resize(spec.dim_a);
            s.xb.resize(spec.dim_b);
            for (std::size_t j = 0; j < spec.dim_a; ++j) s.xa[j] = mu_a[c][j] + noise(noise_rng);
            for (std::size_t j = 0; j < spec.dim_b; ++j) s.xb[j] = mu_b[c][j] + noise(noise_rng);
            pool.samples.push_back(std::move(s));
        }
    }
    return pool;
}

namespace {

std::vector<std::vector<std::size_t>> indices_by_class(const std::vector<Sample>& samples, std::size_t classes) {
    std::vector<std::vector<std::size_t>> by(classes);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const int y = samples[i].label;
        if (y < 0 || static_cast<std::size_t>(y) >= classes) throw ContractError("sample label out of range");
        by[static_cast<std::size_t>(y)].push_back(i);
    }
    return by;
}

} // namespace

std::pair<SamplePool, SamplePool> split_holdout(const SamplePool& pool, double fraction, std::uint64_t seed) {
    Rng rng = make_rng(seed, {3});
    SamplePool held{pool.dim_a, pool.dim_b, pool.classes, {}};
    SamplePool rest{pool.dim_a, pool.dim_b, pool.classes, {}};
    auto by = indices_by_class(pool.samples, pool.classes);
    std::vector<char> take(pool.size(), 0);
    for (auto& idx : by) {
        std::shuffle(idx.begin(), idx.end(), rng);
        const auto n_held = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size())));
        for (std::size_t i = 0; i < n_held && i < idx.size(); ++i) take[idx[i]] = 1;
    }
    for (std::size_t i = 0; i < pool.size(); ++i) (take[i] ? held : rest).samples.push_back(pool.samples[i]);
    return {std::move(held), std::move(rest)};
}

std::vector<ClientDataset> dirichlet_partition(const SamplePool& pool, std::size_t clients, double beta,
                                               std::uint64_t seed, std::size_t min_samples) {
    if (pool.size() == 0) throw ContractError("dirichlet_partition: empty pool");
    if (clients < 1) throw ConfigError("dirichlet_partition: need at least one client");
    if (!(beta > 0.0)) throw ConfigError("dirichlet_partition: beta must be positive");
    if (clients * min_samples > pool.size())
        throw ConfigError("dirichlet_partition: " + std::to_string(clients) + " clients x " +
                          std::to_string(min_samples) + " min samples exceeds pool of " +
                          std::to_string(pool.size()));

    const auto by_class = indices_by_class(pool.samples, pool.classes);
    Rng rng = make_rng(seed, {4});
    std::gamma_distribution<double> gamma(beta, 1.0);

    constexpr int kMaxAttempts = 10000;
    std::vector<std::vector<std::size_t>> assigned;
    bool ok = false;
    for (int attempt = 0; attempt < kMaxAttempts && !ok; ++attempt) {
        assigned.assign(clients, {});
        for (const auto& cls : by_class) {
            std::vector<std::size_t> idx = cls;
            std::shuffle(idx.begin(), idx.end(), rng);
            std::vector<double> p(clients);
            double total = 0.0;
            for (auto& x : p) {
                x = gamma(rng);
                total += x;
            }
            if (!(total > 0.0)) {
                std::fill(p.begin(), p.end(), 1.0);
                total = static_cast<double>(clients);
            }
            double cum = 0.0;
            std::size_t start = 0;
            for (std::size_t k = 0; k < clients; ++k) {
                cum += p[k] / total;
                std::size_t stop = (k + 1 == clients)
                                       ? idx.size()
                                       : std::min(idx.size(), static_cast<std::size_t>(cum * static_cast<double>(idx.size())));
                stop = std::max(stop, start);
                assigned[k].insert(assigned[k].end(), idx.begin() + static_cast<std::ptrdiff_t>(start),
                                   idx.begin() + static_cast<std::ptrdiff_t>(stop));
                start = stop;
            }
        }
        ok = std::all_of(assigned.begin(), assigned.end(),
                         [&](const auto& a) { return a.size() >= std::max<std::size_t>(min_samples, 1); });
    }
    if (!ok)
        throw ConfigError("dirichlet_partition: could not give every client " + std::to_string(min_samples) +
                          " samples; lower clients or raise dirichlet_beta");

    std::vector<ClientDataset> out(clients);
    for (std::size_t k = 0; k < clients; ++k) {
        auto& idx = assigned[k];
        std::sort(idx.begin(), idx.end());
        out[k].id = k;
        out[k].dim_a = pool.dim_a;
        out[k].dim_b = pool.dim_b;
        out[k].train.reserve(idx.size());
        for (auto i : idx) out[k].train.push_back(pool.samples[i]);
        out[k].masks.assign(idx.size(), ModalityMask::complete);
    }
    return out;
}

void split_local_test(std::vector<ClientDataset>& clients, double fraction, std::uint64_t seed) {
    for (auto& c : clients) {
        if (!c.missing_indices.empty()) throw ContractError("split_local_test must run before designate_missing");
        Rng rng = make_rng(seed, {5, c.id});
        std::size_t classes = 0;
        for (const auto& s : c.train) classes = std::max(classes, static_cast<std::size_t>(s.label) + 1);
        auto by = indices_by_class(c.train, classes);
        std::vector<char> to_test(c.train.size(), 0);
        std::size_t n_test = 0;
        for (auto& idx : by) {
            std::shuffle(idx.begin(), idx.end(), rng);
            const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size())));
            for (std::size_t i = 0; i < k && i < idx.size(); ++i) {
                to_test[idx[i]] = 1;
                ++n_test;
            }
        }
        if (n_test >= c.train.size()) continue; // keep at least the shard for training
        std::vector<Sample> train;
        for (std::size_t i = 0; i < c.train.size(); ++i)
            (to_test[i] ? c.test : train).push_back(std::move(c.train[i]));
        c.train = std::move(train);
        c.masks.assign(c.train.size(), ModalityMask::complete);
    }
}

void designate_missing(std::vector<ClientDataset>& clients, double mm, double mc, std::uint64_t seed) {
    if (!(mm >= 0.0 && mm <= 1.0) || !(mc >= 0.0 && mc <= 1.0))
        throw ConfigError("designate_missing: mm and mc must be in [0, 1]");
    for (auto& c : clients) {
        c.missing_designated = false;
        c.missing_indices.clear();
        c.masks.assign(c.train.size(), ModalityMask::complete);
    }
    const auto n_designated = static_cast<std::size_t>(std::llround(mc * static_cast<double>(clients.size())));
    if (n_designated == 0) return;

    Rng pick = make_rng(seed, {6});
    std::vector<std::size_t> order(clients.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), pick);
    order.resize(n_designated);
    std::sort(order.begin(), order.end());

    for (auto k : order) {
        auto& c = clients[k];
        c.missing_designated = true;
        Rng rng = make_rng(seed, {7, c.id});
        const auto n_missing = static_cast<std::size_t>(std::llround(mm * static_cast<double>(c.n())));
        std::vector<std::size_t> idx(c.n());
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(std::min(n_missing, idx.size()));
        std::sort(idx.begin(), idx.end());
        std::bernoulli_distribution coin(0.5);
        for (auto i : idx) c.masks[i] = coin(rng) ? ModalityMask::missing_a : ModalityMask::missing_b;
        c.missing_indices = std::move(idx);
    }
}

void apply_group_shift(std::vector<ClientDataset>& clients, SamplePool& global_test, const PartitionSpec& spec) {
    const std::size_t groups = spec.client_groups;
    if (groups == 0) return;
    Rng rng = make_rng(spec.data_seed, {8});
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<Sample> offsets(groups);
    for (auto& o : offsets) {
        o.xa.resize(spec.dim_a);
        o.xb.resize(spec.dim_b);
        double norm = 0.0;
        for (auto& x : o.xa) {
            x = g(rng);
            norm += x * x;
        }
        for (auto& x : o.xb) {
            x = g(rng);
            norm += x * x;
        }
        const double scale = norm > 0.0 ? spec.group_shift / std::sqrt(norm) : 0.0;
        for (auto& x : o.xa) x *= scale;
        for (auto& x : o.xb) x *= scale;
    }
    auto shift = [](Sample& s, const Sample& o) {
        for (std::size_t j = 0; j < s.xa.size(); ++j) s.xa[j] += o.xa[j];
        for (std::size_t j = 0; j < s.xb.size(); ++j) s.xb[j] += o.xb[j];
    };
    for (auto& c : clients) {
        const auto& o = offsets[c.id % groups];
        for (auto& s : c.train) shift(s, o);
        for (auto& s : c.test) shift(s, o);
    }
    for (std::size_t i = 0; i < global_test.samples.size(); ++i) shift(global_test.samples[i], offsets[i % groups]);
}

double RoundBatches::missing_rate() const noexcept {
    if (subset_size == 0) return 0.0;
    return std::min(static_cast<double>(missing_in_subset) / static_cast<double>(subset_size), 1.0);
}

std::size_t RoundBatches::samples() const noexcept {
    std::size_t n = 0;
    for (const auto& b : batches) n += b.size();
    return n;
}

RoundBatches batch_iter(const ClientDataset& client, std::size_t subset_size, std::size_t batch_size,
                        std::size_t round, std::size_t epoch, std::uint64_t seed, bool activate_missing) {
    if (client.n() == 0) throw ContractError("batch_iter: client " + std::to_string(client.id) + " has no samples");
    if (batch_size < 1) throw ContractError("batch_iter: batch_size must be >= 1");
    if (client.masks.size() != client.n()) throw ContractError("batch_iter: masks not aligned with train set");

    std::vector<std::size_t> idx(client.n());
    std::iota(idx.begin(), idx.end(), 0);
    Rng subset_rng = make_rng(seed, {9, client.id, round});
    std::shuffle(idx.begin(), idx.end(), subset_rng);
    idx.resize(std::min(subset_size, idx.size()));
    std::sort(idx.begin(), idx.end());
    Rng order_rng = make_rng(seed, {10, client.id, round, epoch});
    std::shuffle(idx.begin(), idx.end(), order_rng);

    RoundBatches out;
    out.subset_size = idx.size();
    for (auto i : idx)
        if (activate_missing && client.masks[i] != ModalityMask::complete) ++out.missing_in_subset;

    for (std::size_t start = 0; start < idx.size(); start += batch_size) {
        const std::size_t stop = std::min(idx.size(), start + batch_size);
        Batch b;
        b.dim_a = client.dim_a;
        b.dim_b = client.dim_b;
        b.xa.reserve((stop - start) * client.dim_a);
        b.xb.reserve((stop - start) * client.dim_b);
        std::vector<ModalityMask> masks;
        for (std::size_t p = start; p < stop; ++p) {
            const Sample& s = client.train[idx[p]];
            const ModalityMask m = activate_missing ? client.masks[idx[p]] : ModalityMask::complete;
            if (m == ModalityMask::missing_a) b.xa.insert(b.xa.end(), client.dim_a, 0.0);
            else b.xa.insert(b.xa.end(), s.xa.begin(), s.xa.end());
            if (m == ModalityMask::missing_b) b.xb.insert(b.xb.end(), client.dim_b, 0.0);
            else b.xb.insert(b.xb.end(), s.xb.begin(), s.xb.end());
            b.labels.push_back(s.label);
            b.has_missing = b.has_missing || m != ModalityMask::complete;
            masks.push_back(m);
        }
        out.batches.push_back(std::move(b));
        out.masks.push_back(std::move(masks));
    }
    return out;
}

Batch make_batch(const std::vector<Sample>& samples, std::size_t dim_a, std::size_t dim_b) {
    Batch b;
    b.dim_a = dim_a;
    b.dim_b = dim_b;
    b.xa.reserve(samples.size() * dim_a);
    b.xb.reserve(samples.size() * dim_b);
    for (const auto& s : samples) {
        if (s.xa.size() != dim_a || s.xb.size() != dim_b) throw ContractError("make_batch: sample dims mismatch");
        b.xa.insert(b.xa.end(), s.xa.begin(), s.xa.end());
        b.xb.insert(b.xb.end(), s.xb.begin(), s.xb.end());
        b.labels.push_back(s.label);
    }
    return b;
}

void write_dataset(std::ostream& out, const SamplePool& pool, const std::vector<ModalityMask>& masks) {
    if (!masks.empty() && masks.size() != pool.size()) throw ContractError("write_dataset: masks not aligned");
    out << "# mmic-dataset v1\n" << pool.dim_a << ' ' << pool.dim_b << ' ' << pool.classes << '\n';
    const auto old_prec = out.precision(17);
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const auto& s = pool.samples[i];
        out << s.label;
        for (double x : s.xa) out << ' ' << x;
        for (double x : s.xb) out << ' ' << x;
        out << ' ' << static_cast<int>(masks.empty() ? ModalityMask::complete : masks[i]) << '\n';
    }
    out.precision(old_prec);
}

SamplePool read_dataset(std::istream& in, std::vector<ModalityMask>* masks) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("# mmic-dataset v1", 0) != 0)
        throw ConfigError("read_dataset: missing '# mmic-dataset v1' header");
    SamplePool pool;
    if (!std::getline(in, line)) throw ConfigError("read_dataset: missing dims line");
    {
        std::istringstream dims(line);
        if (!(dims >> pool.dim_a >> pool.dim_b >> pool.classes)) throw ConfigError("read_dataset: bad dims line");
    }
    if (masks) masks->clear();
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        std::istringstream ls(line);
        Sample s;
        s.xa.resize(pool.dim_a);
        s.xb.resize(pool.dim_b);
        int mask = 0;
        bool ok = static_cast<bool>(ls >> s.label);
        for (auto& x : s.xa) ok = ok && static_cast<bool>(ls >> x);
        for (auto& x : s.xb) ok = ok && static_cast<bool>(ls >> x);
        ok = ok && static_cast<bool>(ls >> mask);
        if (!ok || mask < 0 || mask > 2 || s.label < 0 || static_cast<std::size_t>(s.label) >= pool.classes)
            throw ConfigError("read_dataset: malformed row " + std::to_string(row));
        pool.samples.push_back(std::move(s));
        if (masks) masks->push_back(static_cast<ModalityMask>(mask));
    }
    return pool;
}

} // namespace mmic
