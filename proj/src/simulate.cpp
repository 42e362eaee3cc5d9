#include "hypersci/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <unordered_set>

#include <json.hpp>

#include "hypersci/io.hpp"
#include "hypersci/rng.hpp"

namespace hypersci {

namespace {

// Fixed stream tags; changing these changes every generated dataset.
enum SeedStream : std::uint64_t {
    kWeights = 1,
    kCovariates = 2,
    kTreatments = 3,
    kEpsT = 4,
    kEpsY = 5,
    kHypergraph = 6,
};

double dot(const double* a, const double* b, int d) {
    double s = 0.0;
    for (int k = 0; k < d; ++k) s += a[k] * b[k];
    return s;
}

double quad_form(const double* s, const Tensor& wt) {
    // s * Wt * s^T for a row vector s
    double out = 0.0;
    for (int i = 0; i < wt.rows; ++i) {
        if (s[i] == 0.0) continue;
        const double* wrow = &wt.data[static_cast<size_t>(i) * wt.cols];
        double acc = 0.0;
        for (int j = 0; j < wt.cols; ++j) acc += wrow[j] * s[j];
        out += s[i] * acc;
    }
    return out;
}

double sigma_prime_apply(SigmaPrime, double v) { return v; }

double checksum(const std::vector<double>& v) {
    double s = 0.0;
    for (size_t i = 0; i < v.size(); ++i) s += v[i] * static_cast<double>(i % 97 + 1);
    return s;
}

}  // namespace

double SimWeights::checksum_w0() const { return checksum(w0); }
double SimWeights::checksum_w1() const { return checksum(w1); }
double SimWeights::checksum_wt() const { return checksum(wt.data); }
double SimWeights::checksum_vt() const { return checksum(vt); }

SimWeights draw_weights(const SimConfig& cfg) {
    Rng rng(derive_seed(cfg.seed, kWeights));
    SimWeights w;
    w.w0.resize(static_cast<size_t>(cfg.d));
    w.w1.resize(static_cast<size_t>(cfg.d));
    w.vt.resize(static_cast<size_t>(cfg.d));
    w.wt = Tensor(cfg.d, cfg.d);
    for (double& v : w.w0) v = rng.normal();
    for (double& v : w.w1) v = rng.normal();
    // 1/d entry variance keeps the quadratic form at the same scale as the
    // linear one.
    double wt_std = 1.0 / std::sqrt(static_cast<double>(cfg.d));
    for (double& v : w.wt.data) v = rng.normal(0.0, wt_std);
    for (double& v : w.vt) v = rng.normal();
    return w;
}

Tensor gen_covariates(int n, int d, std::uint64_t seed) {
    if (n < 1 || d < 1) throw ShapeMismatch("gen_covariates: n and d must be >= 1");
    Rng rng(derive_seed(seed, kCovariates));
    Tensor x(n, d);
    for (double& v : x.data) v = rng.normal();
    return x;
}

std::vector<int> gen_treatments(const Tensor& x, const std::vector<double>& vt, std::uint64_t seed) {
    if (static_cast<int>(vt.size()) != x.cols) throw ShapeMismatch("gen_treatments: vt length != d");
    Rng rng(derive_seed(seed, kTreatments));
    std::vector<int> t(static_cast<size_t>(x.rows));
    for (int i = 0; i < x.rows; ++i) {
        double logit = dot(&x.data[static_cast<size_t>(i) * x.cols], vt.data(), x.cols);
        double p = 1.0 / (1.0 + std::exp(-logit));
        t[static_cast<size_t>(i)] = rng.uniform() < p ? 1 : 0;
    }
    return t;
}

double f_t(int t, const double* x, int d, const SimWeights& w, Setting setting, double eps_t) {
    if (t == 0) return 0.0;
    if (setting == Setting::Linear) return dot(w.w1.data(), x, d) + eps_t;
    return quad_form(x, w.wt) + eps_t;
}

double f_s(int i, const std::vector<int>& t, const Tensor& x, const Hypergraph& h,
           const SimWeights& w, const SimConfig& cfg) {
    auto edges = h.node_edges(i);
    if (edges.empty()) return 0.0;

    double acc = 0.0;
    std::vector<double> s(static_cast<size_t>(x.cols));
    for (int e : edges) {
        auto members = h.edge_members(e);
        double z = cfg.exclude_self ? static_cast<double>(members.size()) - 1.0
                                    : static_cast<double>(members.size());
        double inner = 0.0;
        if (cfg.setting == Setting::Linear) {
            for (int j : members) {
                if (cfg.exclude_self && j == i) continue;
                if (t[static_cast<size_t>(j)] == 0) continue;
                inner += f_t(1, &x.data[static_cast<size_t>(j) * x.cols], x.cols, w, cfg.setting, 0.0);
            }
            inner /= z;
        } else {
            std::fill(s.begin(), s.end(), 0.0);
            for (int j : members) {
                if (cfg.exclude_self && j == i) continue;
                if (t[static_cast<size_t>(j)] == 0) continue;
                const double* xj = &x.data[static_cast<size_t>(j) * x.cols];
                for (int k = 0; k < x.cols; ++k) s[static_cast<size_t>(k)] += xj[k];
            }
            inner = quad_form(s.data(), w.wt) / (z * z);
        }
        acc += sigma_prime_apply(cfg.sigma_prime, inner);
    }
    return acc / static_cast<double>(edges.size());
}

Hypergraph gen_random_hypergraph(const GeneratorSpec& spec, std::uint64_t seed) {
    if (spec.min_edge_size < 2 || spec.max_edge_size < spec.min_edge_size ||
        spec.max_edge_size > spec.n)
        throw DegenerateEdge("gen_random_hypergraph: bad edge size bounds");
    Rng rng(derive_seed(seed, kHypergraph));
    std::vector<std::vector<int>> edges(static_cast<size_t>(spec.m));
    std::unordered_set<int> seen;
    for (auto& edge : edges) {
        int k = rng.uniform_int(spec.min_edge_size, spec.max_edge_size);
        seen.clear();
        edge.clear();
        while (static_cast<int>(edge.size()) < k) {
            int v = rng.uniform_int(0, spec.n - 1);
            if (seen.insert(v).second) edge.push_back(v);
        }
    }
    return Hypergraph(spec.n, edges);
}

SimDataset simulate_outcomes(const Hypergraph& h, const Tensor& x, const std::vector<int>& t,
                             const SimConfig& cfg) {
    int n = x.rows;
    if (h.n_nodes() != n || static_cast<int>(t.size()) != n)
        throw ShapeMismatch("simulate_outcomes: H, X, T row counts disagree");
    if (x.cols != cfg.d) throw ShapeMismatch("simulate_outcomes: X has d=" + std::to_string(x.cols) +
                                             " but config says " + std::to_string(cfg.d));

    SimDataset ds;
    ds.h = h;
    ds.x = x;
    ds.t = t;
    ds.config = cfg;
    ds.weights = draw_weights(cfg);

    Rng rng_eps_t(derive_seed(cfg.seed, kEpsT));
    Rng rng_eps_y(derive_seed(cfg.seed, kEpsY));
    std::vector<double> eps_t(static_cast<size_t>(n)), eps_y(static_cast<size_t>(n));
    for (double& v : eps_t) v = rng_eps_t.normal(0.0, cfg.eps_t_scale);
    for (double& v : eps_y) v = rng_eps_y.normal(0.0, cfg.noise_scale);

    ds.y.resize(static_cast<size_t>(n));
    ds.y1.resize(static_cast<size_t>(n));
    ds.y0.resize(static_cast<size_t>(n));
    ds.delta_true.resize(static_cast<size_t>(n));
    ds.tau_true = true_ite(x, ds.weights, cfg);

    std::vector<int> t_flip = t;
    for (int i = 0; i < n; ++i) {
        size_t ui = static_cast<size_t>(i);
        const double* xi = &x.data[ui * static_cast<size_t>(x.cols)];
        double base = dot(ds.weights.w0.data(), xi, x.cols);
        double ft1 = cfg.gamma * f_t(1, xi, x.cols, ds.weights, cfg.setting, eps_t[ui]);

        double fs1, fs0;
        if (cfg.exclude_self) {
            fs1 = fs0 = f_s(i, t, x, h, ds.weights, cfg);
        } else {
            // The literal aggregation includes i itself, so its spillover term
            // depends on its own counterfactual treatment.
            t_flip[ui] = 1;
            fs1 = f_s(i, t_flip, x, h, ds.weights, cfg);
            t_flip[ui] = 0;
            fs0 = f_s(i, t_flip, x, h, ds.weights, cfg);
            t_flip[ui] = t[ui];
        }

        ds.y1[ui] = base + ft1 + cfg.beta * fs1 + eps_y[ui];
        ds.y0[ui] = base + cfg.beta * fs0 + eps_y[ui];
        ds.y[ui] = t[ui] != 0 ? ds.y1[ui] : ds.y0[ui];
        ds.delta_true[ui] = true_spillover(i, h, x, t, ds.weights, cfg);
    }
    return ds;
}

SimDataset generate_dataset(const GeneratorSpec& spec, const SimConfig& cfg) {
    Hypergraph h = gen_random_hypergraph(spec, cfg.seed);
    SimWeights w = draw_weights(cfg);
    Tensor x = gen_covariates(spec.n, cfg.d, cfg.seed);
    std::vector<int> t = gen_treatments(x, w.vt, cfg.seed);
    return simulate_outcomes(h, x, t, cfg);
}

std::vector<double> true_ite(const Tensor& x, const SimWeights& w, const SimConfig& cfg) {
    std::vector<double> tau(static_cast<size_t>(x.rows));
    for (int i = 0; i < x.rows; ++i)
        tau[static_cast<size_t>(i)] =
            cfg.gamma * f_t(1, &x.data[static_cast<size_t>(i) * x.cols], x.cols, w, cfg.setting, 0.0);
    return tau;
}

double true_spillover(int i, const Hypergraph& h, const Tensor& x, const std::vector<int>& t,
                      const SimWeights& w, const SimConfig& cfg) {
    double with_t = f_s(i, t, x, h, w, cfg);
    double without = 0.0;
    if (!cfg.exclude_self) {
        std::vector<int> zeroed(t.size(), 0);
        zeroed[static_cast<size_t>(i)] = t[static_cast<size_t>(i)];
        without = f_s(i, zeroed, x, h, w, cfg);
    }
    return cfg.beta * (with_t - without);
}

TabularData load_tabular(const std::string& features_path, const std::string& treatments_path,
                         const std::string& outcomes_path, const std::string& hypergraph_path,
                         bool standardize_features) {
    TabularData td;
    td.x = read_csv_matrix(features_path);
    td.t = read_csv_int_vector(treatments_path);
    td.h = read_hypergraph_file(hypergraph_path);

    if (static_cast<int>(td.t.size()) != td.x.rows)
        throw RowCountMismatch("treatments rows (" + std::to_string(td.t.size()) +
                               ") != features rows (" + std::to_string(td.x.rows) + ")");
    if (td.h.n_nodes() != td.x.rows)
        throw RowCountMismatch("hypergraph nodes (" + std::to_string(td.h.n_nodes()) +
                               ") != features rows (" + std::to_string(td.x.rows) + ")");
    for (int v : td.t)
        if (v != 0 && v != 1) throw ParseError("treatments must be 0/1");

    if (!outcomes_path.empty()) {
        td.y = read_csv_vector(outcomes_path);
        if (static_cast<int>(td.y->size()) != td.x.rows)
            throw RowCountMismatch("outcomes rows (" + std::to_string(td.y->size()) +
                                   ") != features rows (" + std::to_string(td.x.rows) + ")");
    }

    if (standardize_features) {
        for (int j = 0; j < td.x.cols; ++j) {
            double mean = 0.0;
            for (int i = 0; i < td.x.rows; ++i) mean += td.x(i, j);
            mean /= td.x.rows;
            double var = 0.0;
            for (int i = 0; i < td.x.rows; ++i) {
                double c = td.x(i, j) - mean;
                var += c * c;
            }
            var /= td.x.rows;
            double inv_std = var > 0.0 ? 1.0 / std::sqrt(var) : 1.0;
            for (int i = 0; i < td.x.rows; ++i) td.x(i, j) = (td.x(i, j) - mean) * inv_std;
        }
    }
    return td;
}

SimDataset load_tabular_dataset(const std::string& features_path, const std::string& treatments_path,
                                const std::string& outcomes_path, const std::string& hypergraph_path,
                                const SimConfig& cfg, bool standardize_features) {
    TabularData td = load_tabular(features_path, treatments_path, outcomes_path, hypergraph_path,
                                  standardize_features);
    SimConfig adjusted = cfg;
    adjusted.d = td.x.cols;
    return simulate_outcomes(td.h, td.x, td.t, adjusted);
}

std::string setting_name(Setting s) { return s == Setting::Linear ? "linear" : "quadratic"; }

Setting setting_from_name(const std::string& name) {
    if (name == "linear") return Setting::Linear;
    if (name == "quadratic") return Setting::Quadratic;
    throw ConfigError("unknown setting '" + name + "' (expected linear|quadratic)");
}

namespace {

nlohmann::json config_to_json(const SimConfig& cfg) {
    return nlohmann::json{{"setting", setting_name(cfg.setting)},
                          {"d", cfg.d},
                          {"beta", cfg.beta},
                          {"gamma", cfg.gamma},
                          {"noise_scale", cfg.noise_scale},
                          {"eps_t_scale", cfg.eps_t_scale},
                          {"seed", cfg.seed},
                          {"sigma_prime", "identity"},
                          {"exclude_self", cfg.exclude_self}};
}

SimConfig config_from_json(const nlohmann::json& j) {
    SimConfig cfg;
    cfg.setting = setting_from_name(j.at("setting").get<std::string>());
    cfg.d = j.at("d").get<int>();
    cfg.beta = j.at("beta").get<double>();
    cfg.gamma = j.at("gamma").get<double>();
    cfg.noise_scale = j.at("noise_scale").get<double>();
    cfg.eps_t_scale = j.at("eps_t_scale").get<double>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.exclude_self = j.at("exclude_self").get<bool>();
    if (j.at("sigma_prime").get<std::string>() != "identity")
        throw ConfigError("unsupported sigma_prime");
    return cfg;
}

}  // namespace

void save_dataset(const std::string& dir, const SimDataset& ds) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);

    write_hypergraph_file(dir + "/hypergraph.txt", ds.h);
    write_csv_matrix(dir + "/X.csv", ds.x);
    write_csv_int_vector(dir + "/T.csv", ds.t);
    write_csv_vector(dir + "/Y.csv", ds.y);
    write_csv_vector(dir + "/y1.csv", ds.y1);
    write_csv_vector(dir + "/y0.csv", ds.y0);
    write_csv_vector(dir + "/tau.csv", ds.tau_true);
    write_csv_vector(dir + "/delta.csv", ds.delta_true);

    nlohmann::json meta{{"format_version", 1},
                        {"config", config_to_json(ds.config)},
                        {"weight_checksums",
                         {{"w0", ds.weights.checksum_w0()},
                          {"w1", ds.weights.checksum_w1()},
                          {"wt", ds.weights.checksum_wt()},
                          {"vt", ds.weights.checksum_vt()}}},
                        {"n", ds.n()},
                        {"m", ds.h.n_edges()}};
    atomic_write_file(dir + "/meta.json", meta.dump(2) + "\n");
}

SimDataset load_dataset(const std::string& dir) {
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(read_file(dir + "/meta.json"));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(dir + "/meta.json: " + e.what());
    }

    SimDataset ds;
    ds.config = config_from_json(meta.at("config"));
    ds.h = read_hypergraph_file(dir + "/hypergraph.txt");
    ds.x = read_csv_matrix(dir + "/X.csv");
    ds.t = read_csv_int_vector(dir + "/T.csv");
    ds.y = read_csv_vector(dir + "/Y.csv");
    ds.y1 = read_csv_vector(dir + "/y1.csv");
    ds.y0 = read_csv_vector(dir + "/y0.csv");
    ds.tau_true = read_csv_vector(dir + "/tau.csv");
    ds.delta_true = read_csv_vector(dir + "/delta.csv");

    size_t n = static_cast<size_t>(ds.x.rows);
    if (ds.t.size() != n || ds.y.size() != n || ds.y1.size() != n || ds.y0.size() != n ||
        ds.tau_true.size() != n || ds.delta_true.size() != n || ds.h.n_nodes() != ds.x.rows)
        throw RowCountMismatch(dir + ": dataset files disagree on node count");

    // Weights regenerate deterministically from the stored seed; the checksums
    // catch a meta.json that drifted from the payload files.
    ds.weights = draw_weights(ds.config);
    const auto& cks = meta.at("weight_checksums");
    if (std::abs(cks.at("w0").get<double>() - ds.weights.checksum_w0()) > 1e-9 ||
        std::abs(cks.at("w1").get<double>() - ds.weights.checksum_w1()) > 1e-9 ||
        std::abs(cks.at("wt").get<double>() - ds.weights.checksum_wt()) > 1e-9 ||
        std::abs(cks.at("vt").get<double>() - ds.weights.checksum_vt()) > 1e-9)
        throw ParseError(dir + ": weight checksums do not match the stored seed");
    return ds;
}

}  // namespace hypersci
