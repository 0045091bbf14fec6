#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace manydelta {

using Complex = std::complex<double>;
// Planar particle positions z^1..z^N stored as complex numbers.
using Configuration = std::vector<Complex>;

class SingularState : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParamError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Interaction pair. Particle indices are 0-based here; the text form
// "u-l" used in configs is 1-based.
struct Edge {
    int upper;
    int lower;
    friend bool operator==(const Edge&, const Edge&) = default;
};

int edge_count(int n);
// Canonical index: lexicographic by (upper, lower).
int edge_index(Edge e);
Edge edge_at(int index);
std::vector<Edge> all_edges(int n);
std::string edge_key(Edge e);
Edge parse_edge_key(const std::string& key, int n);

// sigma(a).sigma(b) for the signed incidence vectors e_upper - e_lower.
int sigma_dot(Edge a, Edge b);

struct ModelParams {
    int n = 0;
    std::vector<double> beta;    // per edge, canonical order
    std::vector<double> weight;  // per edge, canonical order

    // Validates n >= 3, beta > 0, weight >= 0 and at least two positive weights.
    static ModelParams create(int n, std::vector<double> beta, std::vector<double> weight);
    static ModelParams uniform(int n, double beta, double weight = 1.0);

    // Weights replaced by the indicator of one edge. This is the one-delta
    // reduction and deliberately skips the two-weight requirement.
    ModelParams indicator(int edge) const;

    int edges() const { return static_cast<int>(beta.size()); }
    int positive_count() const;
    bool homogeneous() const;
    double min_positive_beta() const;
    double max_positive_beta() const;
};

// Z^e = (z^upper - z^lower)/sqrt(2) for every edge.
std::vector<Complex> separations(const Configuration& z);
void separations(const Configuration& z, std::vector<Complex>& out);

// Separations below this are treated as exact contacts.
inline constexpr double kContactFloor = 1e-300;

// Per-edge ingredients of the weighted K-sum, normalised so that nothing
// overflows or underflows for widely separated configurations.
struct KsumTerms {
    std::vector<double> radius;   // |Z^e|, after flooring
    std::vector<double> k0_share; // w_e K0(sqrt(2 beta_e)|Z^e|) / K-sum
    std::vector<double> coeff;    // w_e Khat1(sqrt(2 beta_e)|Z^e|) / K-sum
    double log_ksum = 0.0;
};

// radius_floor > 0 evaluates every radius below the floor at the floor.
// With radius_floor == 0 a positively weighted contact throws SingularState.
void evaluate_ksum(const std::vector<Complex>& seps, const ModelParams& p, double radius_floor,
                   KsumTerms& out);

double weighted_k0_sum(const Configuration& z, const ModelParams& p);
double log_weighted_k0_sum(const Configuration& z, const ModelParams& p);

std::vector<Complex> drift_particles(const Configuration& z, const ModelParams& p);
std::vector<Complex> drift_relative(const Configuration& z, const ModelParams& p);

// Drift assembly from precomputed terms; used by the integrators.
void particle_drift_from_terms(const std::vector<Complex>& seps, const KsumTerms& t, int n,
                               std::vector<Complex>& out);
void relative_drift_from_terms(const std::vector<Complex>& seps, const KsumTerms& t,
                               std::vector<Complex>& out);

// Phi term of the radii-sum decomposition for edge j in the subset.
double phi_term(const std::vector<int>& subset, int edge_j, const Configuration& z,
                const ModelParams& p);

struct StateClass {
    enum class Tag { AllSeparated, SingleContact, MultiContact };
    Tag tag = Tag::AllSeparated;
    int edge = -1;  // set for SingleContact
    bool eligible() const { return tag != Tag::MultiContact; }
};

StateClass classify_state(const Configuration& z, const ModelParams& p, double contact_tol);

}  // namespace manydelta
