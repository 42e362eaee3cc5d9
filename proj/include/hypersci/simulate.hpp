#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hypersci/hypergraph.hpp"
#include "hypersci/tensor.hpp"

namespace hypersci {

enum class Setting { Linear, Quadratic };
enum class SigmaPrime { Identity };

struct SimConfig {
    Setting setting = Setting::Linear;
    int d = 50;
    double beta = 1.0;
    double gamma = 1.0;
    double noise_scale = 1.0;   // std of the per-node outcome noise
    double eps_t_scale = 1.0;   // std of the noise inside the treatment-effect term
    std::uint64_t seed = 0;
    SigmaPrime sigma_prime = SigmaPrime::Identity;
    // When true (default), the spillover aggregation over a hyperedge skips the
    // target node itself and normalizes by |N_e| - 1, so a node's own treatment
    // never leaks into its spillover term. false keeps the literal sum over all
    // hyperedge members.
    bool exclude_self = true;
};

struct SimWeights {
    std::vector<double> w0;  // baseline outcome, length d
    std::vector<double> w1;  // linear treatment effect, length d
    Tensor wt;               // quadratic treatment effect, d x d
    std::vector<double> vt;  // treatment assignment model, length d

    double checksum_w0() const;
    double checksum_w1() const;
    double checksum_wt() const;
    double checksum_vt() const;
};

struct SimDataset {
    Hypergraph h;
    Tensor x;                        // n x d covariates
    std::vector<int> t;              // binary treatments
    std::vector<double> y;           // observed outcomes
    std::vector<double> y1, y0;      // potential outcomes
    std::vector<double> tau_true;    // ground-truth ITE
    std::vector<double> delta_true;  // ground-truth spillover
    SimWeights weights;
    SimConfig config;

    int n() const { return x.rows; }
};

// Random hyperedges with sizes uniform in [min_edge_size, max_edge_size] and
// distinct members; used for the Contact-style semi-synthetic benchmark.
struct GeneratorSpec {
    int n = 327;
    int m = 800;
    int min_edge_size = 2;
    int max_edge_size = 8;
};

// All draws run on streams derived from the dataset seed, so e.g. swapping the
// hypergraph leaves the covariate/noise draws untouched.
SimWeights draw_weights(const SimConfig& cfg);

Tensor gen_covariates(int n, int d, std::uint64_t seed);

std::vector<int> gen_treatments(const Tensor& x, const std::vector<double>& vt, std::uint64_t seed);

// Treatment-effect term: 0 when t = 0, otherwise w1.x + eps_t (linear) or
// x^T Wt x + eps_t (quadratic).
double f_t(int t, const double* x, int d, const SimWeights& w, Setting setting, double eps_t);

// Spillover term for node i: mean over incident hyperedges of the normalized
// treated-neighbor aggregation. 0 for isolated nodes.
double f_s(int i, const std::vector<int>& t, const Tensor& x, const Hypergraph& h,
           const SimWeights& w, const SimConfig& cfg);

Hypergraph gen_random_hypergraph(const GeneratorSpec& spec, std::uint64_t seed);

// Potential outcomes for both values of t_i with everyone else's treatment
// held observed. Outcome noise is drawn once per node and shared by y1/y0.
SimDataset simulate_outcomes(const Hypergraph& h, const Tensor& x, const std::vector<int>& t,
                             const SimConfig& cfg);

// The full Contact-style pipeline: random hypergraph, covariates, treatments,
// then outcomes.
SimDataset generate_dataset(const GeneratorSpec& spec, const SimConfig& cfg);

std::vector<double> true_ite(const Tensor& x, const SimWeights& w, const SimConfig& cfg);

double true_spillover(int i, const Hypergraph& h, const Tensor& x, const std::vector<int>& t,
                      const SimWeights& w, const SimConfig& cfg);

// Covariates/treatments from headerless CSVs plus a hypergraph file; outcomes
// are layered on via simulate_outcomes. An optional real outcome column is
// checked for row count but ground truth always comes from the simulation.
struct TabularData {
    Hypergraph h;
    Tensor x;
    std::vector<int> t;
    std::optional<std::vector<double>> y;
};

TabularData load_tabular(const std::string& features_path, const std::string& treatments_path,
                         const std::string& outcomes_path, const std::string& hypergraph_path,
                         bool standardize_features);

SimDataset load_tabular_dataset(const std::string& features_path, const std::string& treatments_path,
                                const std::string& outcomes_path, const std::string& hypergraph_path,
                                const SimConfig& cfg, bool standardize_features = false);

// Directory layout: hypergraph.txt, X.csv, T.csv, Y.csv, y1.csv, y0.csv,
// tau.csv, delta.csv, meta.json.
void save_dataset(const std::string& dir, const SimDataset& ds);
SimDataset load_dataset(const std::string& dir);

std::string setting_name(Setting s);
Setting setting_from_name(const std::string& name);

}  // namespace hypersci
