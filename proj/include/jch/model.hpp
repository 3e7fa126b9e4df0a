// model.hpp - Jaynes-Cummings-Hubbard arrays: bare and polariton pictures
//
// Units: g = 1 sets the scale unless a different g is passed; rates, detuning
// and energies are in units of g, time in units of 1/g.
//
// Basis ordering: site-major tensor order with site 0 leftmost. Inside a bare
// site the atom index varies slowest and the photon index fastest,
//   index(atom, photon) = atom * (n_max + 1) + photon,   atom: 0 = g, 1 = e.
// Inside a dressed site (effective models) the ordering is
//   0 = G, 2n - 1 = |n->, 2n = |n+>  (n = 1..n_max),
// and the lower-branch model keeps only G = |0>, |1->, ..., |n_max->.

#pragma once

#include "jch/linalg.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace jch {

// ---------------------------------------------------------------- labels

enum class Branch { ground, minus, plus };

struct PolaritonLabel {
    int n{0};
    Branch branch{Branch::ground};

    static PolaritonLabel ground() { return {0, Branch::ground}; }
    static PolaritonLabel minus(int n) { return {n, Branch::minus}; }
    static PolaritonLabel plus(int n) { return {n, Branch::plus}; }

    bool valid() const noexcept {
        if (n < 0) return false;
        return (branch == Branch::ground) == (n == 0);
    }

    void check() const {
        if (!valid()) {
            throw DomainError("invalid polariton label (n = " + std::to_string(n) +
                              "); ground <=> n = 0, otherwise minus/plus");
        }
    }

    std::string str() const {
        if (branch == Branch::ground) return "G";
        return std::to_string(n) + (branch == Branch::minus ? "-" : "+");
    }

    /// "G", "0", "2-", "1+".
    static PolaritonLabel parse(std::string_view s) {
        auto trim = [](std::string_view v) {
            while (!v.empty() && std::isspace(static_cast<unsigned char>(v.front()))) v.remove_prefix(1);
            while (!v.empty() && std::isspace(static_cast<unsigned char>(v.back()))) v.remove_suffix(1);
            return v;
        };
        s = trim(s);
        if (s == "G" || s == "g" || s == "0") return ground();
        if (s.size() < 2) throw ConfigError("cannot parse polariton label '" + std::string(s) + "'");
        const char b = s.back();
        if (b != '-' && b != '+') throw ConfigError("polariton label needs a +/- branch: '" + std::string(s) + "'");
        int n = 0;
        for (char c : s.substr(0, s.size() - 1)) {
            if (!std::isdigit(static_cast<unsigned char>(c))) {
                throw ConfigError("cannot parse polariton label '" + std::string(s) + "'");
            }
            n = n * 10 + (c - '0');
        }
        PolaritonLabel lab{n, b == '-' ? Branch::minus : Branch::plus};
        if (!lab.valid()) throw ConfigError("invalid polariton label '" + std::string(s) + "'");
        return lab;
    }

    bool operator==(const PolaritonLabel&) const = default;
};

// ------------------------------------------------------------- parameters

struct ModelParams {
    int n_sites{2};
    double omega_a{0.0};
    double omega_c{0.0};
    std::vector<double> g;      // per-site coupling, length n_sites
    std::vector<double> hop;    // J_j, length n_sites - 1
    std::vector<double> gamma;  // cavity damping, length n_sites
    int n_max{2};

    double detuning() const noexcept { return omega_a - omega_c; }
    double coupling(int site) const { return g.at(static_cast<std::size_t>(site)); }

    /// Problems as "field: reason" strings; empty when valid.
    std::vector<std::string> problems() const {
        std::vector<std::string> out;
        auto finite = [](double x) { return std::isfinite(x); };
        if (n_sites < 1) out.push_back("n_sites: must be >= 1");
        if (n_max < 1) out.push_back("n_max: must be >= 1");
        if (!finite(omega_a)) out.push_back("omega_a: not finite");
        if (!finite(omega_c)) out.push_back("omega_c: not finite");
        const auto ns = static_cast<std::size_t>(std::max(n_sites, 0));
        if (g.size() != ns) out.push_back("g: length must equal n_sites");
        for (double x : g)
            if (!finite(x) || x <= 0.0) out.push_back("g: entries must be finite and > 0");
        if (hop.size() != (ns > 0 ? ns - 1 : 0)) out.push_back("hop: length must equal n_sites - 1");
        for (double x : hop)
            if (!finite(x)) out.push_back("hop: entries must be finite");
        if (gamma.size() != ns) out.push_back("gamma: length must equal n_sites");
        for (double x : gamma)
            if (!finite(x) || x < 0.0) out.push_back("gamma: entries must be finite and >= 0");
        return out;
    }

    void validate() const {
        const auto p = problems();
        if (p.empty()) return;
        std::string msg = "invalid model parameters:";
        for (const auto& s : p) msg += " [" + s + "]";
        throw ConfigError(msg);
    }

    static ModelParams uniform(int n_sites, double delta, double hop, double gamma, int n_max,
                               double g = 1.0, double omega_c = 0.0) {
        ModelParams p;
        p.n_sites = n_sites;
        p.omega_c = omega_c;
        p.omega_a = omega_c + delta;
        p.g.assign(static_cast<std::size_t>(n_sites), g);
        p.hop.assign(static_cast<std::size_t>(std::max(n_sites - 1, 0)), hop);
        p.gamma.assign(static_cast<std::size_t>(n_sites), gamma);
        p.n_max = n_max;
        return p;
    }
};

// ------------------------------------------------------- dressed states

/// theta_n = 1/2 arctan(g sqrt(n) / (delta / 2)), continued through delta <= 0.
inline double mixing_angle(int n, double delta, double g) {
    if (n < 1) throw DomainError("mixing_angle: n must be >= 1 (no dressed pair at zero excitation)");
    if (!(g > 0.0)) throw DomainError("mixing_angle: g must be > 0");
    return 0.5 * std::atan2(2.0 * g * std::sqrt(static_cast<double>(n)), delta);
}

/// Eigenvalue of the dressed state `label` of one site (E_0 = 0).
inline double polariton_energy(const PolaritonLabel& label, const ModelParams& p, int site = 0) {
    label.check();
    if (label.branch == Branch::ground) return 0.0;
    const double d = p.detuning();
    const double gj = p.coupling(site);
    const double n = label.n;
    const double split = 0.5 * std::sqrt(d * d + 4.0 * gj * gj * n);
    return p.omega_c * n + 0.5 * d + (label.branch == Branch::plus ? split : -split);
}

/// Photon-loss-free anharmonicity E_{2-} + E_0 - 2 E_{1-}, the mismatch that blocks |11>.
inline double blockade_mismatch(double delta, double g = 1.0) {
    auto Em = [&](double n) { return 0.5 * delta - 0.5 * std::sqrt(delta * delta + 4.0 * g * g * n); };
    return Em(2.0) - 2.0 * Em(1.0);
}

inline Index bare_site_dim(int n_max) { return 2 * static_cast<Index>(n_max + 1); }
inline Index bare_index(int atom, int photon, int n_max) { return atom * (n_max + 1) + photon; }

/// Dressed state in the bare single-site basis.
inline StateVector dressed_state(const PolaritonLabel& label, const ModelParams& p, int site = 0) {
    label.check();
    if (label.n > p.n_max) {
        throw TruncationError("dressed_state: n = " + std::to_string(label.n) + " exceeds n_max = " +
                              std::to_string(p.n_max));
    }
    StateVector v = StateVector::Zero(bare_site_dim(p.n_max));
    if (label.branch == Branch::ground) {
        v(bare_index(0, 0, p.n_max)) = 1.0;
        return v;
    }
    const double th = mixing_angle(label.n, p.detuning(), p.coupling(site));
    const Index ng = bare_index(0, label.n, p.n_max);
    const Index ne = bare_index(1, label.n - 1, p.n_max);
    if (label.branch == Branch::minus) {
        v(ng) = std::cos(th);
        v(ne) = -std::sin(th);
    } else {
        v(ng) = std::sin(th);
        v(ne) = std::cos(th);
    }
    return v;
}

// -------------------------------------------------- hopping coefficients

struct HoppingCoefficients {
    int i{1};
    double c_plus{0.0};
    double c_minus{0.0};
    double k_pm{0.0};  // <i+| a^dag |(i-1)->
    double k_mp{0.0};  // <i-| a^dag |(i-1)+>
};

inline HoppingCoefficients hopping_coefficients(int i, double delta, double g) {
    if (i < 1) throw DomainError("hopping_coefficients: i must be >= 1");
    HoppingCoefficients c;
    c.i = i;
    const double ti = mixing_angle(i, delta, g);
    if (i == 1) {
        c.c_plus = std::sin(ti);
        c.c_minus = std::cos(ti);
        return c;
    }
    const double tp = mixing_angle(i - 1, delta, g);
    const double si = std::sqrt(static_cast<double>(i));
    const double sm = std::sqrt(static_cast<double>(i - 1));
    c.c_plus = si * std::sin(ti) * std::sin(tp) + sm * std::cos(ti) * std::cos(tp);
    c.c_minus = si * std::cos(ti) * std::cos(tp) + sm * std::sin(ti) * std::sin(tp);
    c.k_pm = si * std::sin(ti) * std::cos(tp) - sm * std::cos(ti) * std::sin(tp);
    c.k_mp = si * std::cos(ti) * std::sin(tp) - sm * std::sin(ti) * std::cos(tp);
    return c;
}

inline Index dressed_site_dim(int n_max) { return 2 * static_cast<Index>(n_max) + 1; }

inline Index dressed_index(const PolaritonLabel& label) {
    label.check();
    if (label.branch == Branch::ground) return 0;
    return label.branch == Branch::minus ? 2 * label.n - 1 : 2 * label.n;
}

inline PolaritonLabel dressed_label(Index idx) {
    if (idx == 0) return PolaritonLabel::ground();
    const int n = static_cast<int>((idx + 1) / 2);
    return idx % 2 == 1 ? PolaritonLabel::minus(n) : PolaritonLabel::plus(n);
}

/// Columns are the dressed states (dressed ordering) written in the bare basis.
inline ComplexMatrix dressed_basis(const ModelParams& p, int site = 0) {
    const Index nd = dressed_site_dim(p.n_max);
    ComplexMatrix u(bare_site_dim(p.n_max), nd);
    for (Index k = 0; k < nd; ++k) u.col(k) = dressed_state(dressed_label(k), p, site);
    return u;
}

/// Single-site a^dag in the dressed ordering, assembled from the closed-form
/// coefficients. Without interconverting terms only the same-branch ladders
/// P_+^dag and P_-^dag survive.
inline ComplexMatrix creation_in_polariton_basis(const ModelParams& p, bool include_interconverting,
                                                 int site = 0) {
    if (p.n_max < 1) throw DomainError("creation_in_polariton_basis: n_max must be >= 1");
    const Index nd = dressed_site_dim(p.n_max);
    ComplexMatrix m = ComplexMatrix::Zero(nd, nd);
    const double d = p.detuning();
    const double gj = p.coupling(site);
    for (int i = 1; i <= p.n_max; ++i) {
        const auto c = hopping_coefficients(i, d, gj);
        const Index up_m = dressed_index(PolaritonLabel::minus(i));
        const Index up_p = dressed_index(PolaritonLabel::plus(i));
        if (i == 1) {
            m(up_m, 0) = c.c_minus;
            m(up_p, 0) = c.c_plus;
            continue;
        }
        const Index lo_m = dressed_index(PolaritonLabel::minus(i - 1));
        const Index lo_p = dressed_index(PolaritonLabel::plus(i - 1));
        m(up_m, lo_m) = c.c_minus;
        m(up_p, lo_p) = c.c_plus;
        if (include_interconverting) {
            m(up_p, lo_m) = c.k_pm;
            m(up_m, lo_p) = c.k_mp;
        }
    }
    return m;
}

// ------------------------------------------------------- bare operators

struct SiteOperatorSet {
    ComplexMatrix a;
    ComplexMatrix a_dag;
    ComplexMatrix sigma_minus;   // |g><e| (x) I_field
    ComplexMatrix excited_proj;  // |e><e| (x) I_field
    ComplexMatrix number_op;     // a^dag a
    ComplexMatrix total_excitation;
};

inline SiteOperatorSet site_operators(int n_max) {
    if (n_max < 1) throw DomainError("site_operators: n_max must be >= 1");
    const Index nf = n_max + 1;
    ComplexMatrix field_a = ComplexMatrix::Zero(nf, nf);
    for (Index k = 1; k < nf; ++k) field_a(k - 1, k) = std::sqrt(static_cast<double>(k));
    ComplexMatrix sm = ComplexMatrix::Zero(2, 2);
    sm(0, 1) = 1.0;
    ComplexMatrix ee = ComplexMatrix::Zero(2, 2);
    ee(1, 1) = 1.0;
    const ComplexMatrix i_atom = ComplexMatrix::Identity(2, 2);
    const ComplexMatrix i_field = ComplexMatrix::Identity(nf, nf);

    SiteOperatorSet s;
    s.a = kron(i_atom, field_a);
    s.a_dag = s.a.adjoint();
    s.sigma_minus = kron(sm, i_field);
    s.excited_proj = kron(ee, i_field);
    s.number_op = s.a_dag * s.a;
    s.total_excitation = s.number_op + s.excited_proj;
    return s;
}

/// omega_a |e><e| + omega_c a^dag a + g (a^dag sigma_- + a sigma_+) for one site.
inline ComplexMatrix site_hamiltonian(const ModelParams& p, int site = 0) {
    const auto s = site_operators(p.n_max);
    const ComplexMatrix ad_sm = s.a_dag * s.sigma_minus;
    return p.omega_a * s.excited_proj + p.omega_c * s.number_op +
           p.coupling(site) * (ad_sm + ad_sm.adjoint());
}

inline TensorDims bare_dims(const ModelParams& p) {
    return TensorDims(std::vector<Index>(static_cast<std::size_t>(p.n_sites), bare_site_dim(p.n_max)));
}

inline void check_dimension_cap(const TensorDims& dims, Index max_dim) {
    Index t = 1;
    for (std::size_t k = 0; k < dims.size(); ++k) t = checked_product(t, dims[k], max_dim);
}

/// Full N-site Hamiltonian in the bare basis, embedded with Kronecker products.
inline ComplexMatrix build_full_hamiltonian(const ModelParams& p, Index max_dim = kDefaultMaxDim) {
    p.validate();
    const TensorDims dims = bare_dims(p);
    check_dimension_cap(dims, max_dim);
    const auto s = site_operators(p.n_max);
    const Index D = dims.total();
    ComplexMatrix h = ComplexMatrix::Zero(D, D);
    std::vector<ComplexMatrix> a(static_cast<std::size_t>(p.n_sites));
    for (int j = 0; j < p.n_sites; ++j) {
        const auto sj = static_cast<std::size_t>(j);
        h += embed_site_operator(site_hamiltonian(p, j), dims, sj, max_dim);
        a[sj] = embed_site_operator(s.a, dims, sj, max_dim);
    }
    for (int j = 0; j + 1 < p.n_sites; ++j) {
        const auto sj = static_cast<std::size_t>(j);
        const ComplexMatrix t = a[sj].adjoint() * a[sj + 1];
        h += p.hop[sj] * (t + t.adjoint());
    }
    return h;
}

inline ComplexMatrix total_excitation_operator(const ModelParams& p, Index max_dim = kDefaultMaxDim) {
    const TensorDims dims = bare_dims(p);
    check_dimension_cap(dims, max_dim);
    const auto s = site_operators(p.n_max);
    ComplexMatrix n = ComplexMatrix::Zero(dims.total(), dims.total());
    for (std::size_t j = 0; j < dims.size(); ++j) n += embed_site_operator(s.total_excitation, dims, j, max_dim);
    return n;
}

// ------------------------------------------------------- model variants

enum class ModelVariant { full, full_hop, rwa_hop, lower_branch };

inline std::string to_string(ModelVariant v) {
    switch (v) {
        case ModelVariant::full: return "full";
        case ModelVariant::full_hop: return "full_hop";
        case ModelVariant::rwa_hop: return "rwa_hop";
        case ModelVariant::lower_branch: return "lower_branch";
    }
    return "?";
}

inline ModelVariant parse_variant(std::string_view s) {
    if (s == "full") return ModelVariant::full;
    if (s == "full_hop") return ModelVariant::full_hop;
    if (s == "rwa_hop") return ModelVariant::rwa_hop;
    if (s == "lower_branch") return ModelVariant::lower_branch;
    throw ConfigError("unknown model variant '" + std::string(s) + "'");
}

/// Everything a builder needs about one site in a given picture.
struct SiteModel {
    ComplexMatrix h;                     // on-site part
    ComplexMatrix loss;                  // photon annihilation in this picture
    std::vector<ComplexMatrix> hop_parts;  // H_hop = J sum_p (A_p^dag (x) A_p + h.c.)
    std::vector<int> excitation;         // excitation number of each basis state

    Index dim() const { return h.rows(); }
};

inline SiteModel site_model(const ModelParams& p, ModelVariant variant, int site,
                            bool include_interconverting = false) {
    SiteModel m;
    const int nm = p.n_max;
    switch (variant) {
        case ModelVariant::full: {
            const auto s = site_operators(nm);
            m.h = site_hamiltonian(p, site);
            m.loss = s.a;
            m.hop_parts = {s.a};
            m.excitation.resize(static_cast<std::size_t>(bare_site_dim(nm)));
            for (int atom = 0; atom < 2; ++atom)
                for (int ph = 0; ph <= nm; ++ph)
                    m.excitation[static_cast<std::size_t>(bare_index(atom, ph, nm))] = atom + ph;
            break;
        }
        case ModelVariant::full_hop:
        case ModelVariant::rwa_hop: {
            const Index nd = dressed_site_dim(nm);
            m.h = ComplexMatrix::Zero(nd, nd);
            m.excitation.resize(static_cast<std::size_t>(nd));
            for (Index k = 0; k < nd; ++k) {
                const auto lab = dressed_label(k);
                m.h(k, k) = polariton_energy(lab, p, site);
                m.excitation[static_cast<std::size_t>(k)] = lab.n;
            }
            const ComplexMatrix c = creation_in_polariton_basis(p, include_interconverting, site);
            m.loss = c.adjoint();
            if (variant == ModelVariant::full_hop) {
                m.hop_parts = {m.loss};
            } else {
                // split the same-branch ladders: P_+ and P_-
                const ComplexMatrix same = creation_in_polariton_basis(p, false, site);
                ComplexMatrix plus = ComplexMatrix::Zero(nd, nd), minus = ComplexMatrix::Zero(nd, nd);
                for (Index r = 0; r < nd; ++r)
                    for (Index col = 0; col < nd; ++col) {
                        if (same(r, col) == cplx{}) continue;
                        (dressed_label(r).branch == Branch::plus ? plus : minus)(r, col) = same(r, col);
                    }
                m.hop_parts = {plus.adjoint(), minus.adjoint()};
            }
            break;
        }
        case ModelVariant::lower_branch: {
            const Index nd = nm + 1;
            m.h = ComplexMatrix::Zero(nd, nd);
            ComplexMatrix create = ComplexMatrix::Zero(nd, nd);
            m.excitation.resize(static_cast<std::size_t>(nd));
            for (int n = 0; n <= nm; ++n) {
                const auto lab = n == 0 ? PolaritonLabel::ground() : PolaritonLabel::minus(n);
                m.h(n, n) = polariton_energy(lab, p, site);
                m.excitation[static_cast<std::size_t>(n)] = n;
                if (n >= 1) create(n, n - 1) = hopping_coefficients(n, p.detuning(), p.coupling(site)).c_minus;
            }
            m.loss = create.adjoint();
            m.hop_parts = {m.loss};
            break;
        }
    }
    return m;
}

/// Single-site vector for `label` in the basis of `variant`.
inline StateVector site_state(const PolaritonLabel& label, const ModelParams& p, ModelVariant variant,
                              int site = 0) {
    label.check();
    if (label.n > p.n_max) {
        throw TruncationError("site_state: n = " + std::to_string(label.n) + " exceeds n_max = " +
                              std::to_string(p.n_max));
    }
    switch (variant) {
        case ModelVariant::full: return dressed_state(label, p, site);
        case ModelVariant::full_hop:
        case ModelVariant::rwa_hop: {
            StateVector v = StateVector::Zero(dressed_site_dim(p.n_max));
            v(dressed_index(label)) = 1.0;
            return v;
        }
        case ModelVariant::lower_branch: {
            if (label.branch == Branch::plus) {
                throw ContractError("site_state: the lower-branch model has no upper-branch state " + label.str());
            }
            StateVector v = StateVector::Zero(p.n_max + 1);
            v(label.n) = 1.0;
            return v;
        }
    }
    return {};
}

inline TensorDims variant_dims(const ModelParams& p, ModelVariant variant) {
    Index d = 0;
    switch (variant) {
        case ModelVariant::full: d = bare_site_dim(p.n_max); break;
        case ModelVariant::full_hop:
        case ModelVariant::rwa_hop: d = dressed_site_dim(p.n_max); break;
        case ModelVariant::lower_branch: d = p.n_max + 1; break;
    }
    return TensorDims(std::vector<Index>(static_cast<std::size_t>(p.n_sites), d));
}

/// Effective Hamiltonian (hopping mapped to polaritons) on the full product
/// space of the chosen picture. `full` returns build_full_hamiltonian.
inline ComplexMatrix build_effective_hamiltonian(const ModelParams& p, ModelVariant variant,
                                                 bool include_interconverting = false,
                                                 Index max_dim = kDefaultMaxDim) {
    if (variant == ModelVariant::full) return build_full_hamiltonian(p, max_dim);
    p.validate();
    const TensorDims dims = variant_dims(p, variant);
    check_dimension_cap(dims, max_dim);
    const Index D = dims.total();
    ComplexMatrix h = ComplexMatrix::Zero(D, D);
    std::vector<SiteModel> sites;
    for (int j = 0; j < p.n_sites; ++j) sites.push_back(site_model(p, variant, j, include_interconverting));
    for (std::size_t j = 0; j < sites.size(); ++j) h += embed_site_operator(sites[j].h, dims, j, max_dim);
    for (std::size_t j = 0; j + 1 < sites.size(); ++j) {
        for (std::size_t part = 0; part < sites[j].hop_parts.size(); ++part) {
            const ComplexMatrix left = embed_site_operator(sites[j].hop_parts[part], dims, j, max_dim);
            const ComplexMatrix right = embed_site_operator(sites[j + 1].hop_parts[part], dims, j + 1, max_dim);
            const ComplexMatrix t = left.adjoint() * right;
            h += p.hop[j] * (t + t.adjoint());
        }
    }
    return h;
}

/// sqrt(gamma_j) a_j for every site with gamma_j > 0 (full product space).
inline std::vector<ComplexMatrix> collapse_operators(const ModelParams& p,
                                                     ModelVariant variant = ModelVariant::full,
                                                     bool include_interconverting = false,
                                                     Index max_dim = kDefaultMaxDim) {
    p.validate();
    const TensorDims dims = variant_dims(p, variant);
    check_dimension_cap(dims, max_dim);
    std::vector<ComplexMatrix> out;
    for (int j = 0; j < p.n_sites; ++j) {
        const double gj = p.gamma[static_cast<std::size_t>(j)];
        if (gj <= 0.0) continue;
        const auto sm = site_model(p, variant, j, include_interconverting);
        out.push_back(std::sqrt(gj) * embed_site_operator(sm.loss, dims, static_cast<std::size_t>(j), max_dim));
    }
    return out;
}

/// Tensor product of per-site polariton states (full product space).
inline StateVector prepare_product_polariton_state(const std::vector<PolaritonLabel>& labels,
                                                   const ModelParams& p,
                                                   ModelVariant variant = ModelVariant::full,
                                                   Index max_dim = kDefaultMaxDim) {
    if (labels.size() != static_cast<std::size_t>(p.n_sites)) {
        throw ContractError("prepare_product_polariton_state: need one label per site");
    }
    std::vector<StateVector> parts;
    for (int j = 0; j < p.n_sites; ++j) parts.push_back(site_state(labels[static_cast<std::size_t>(j)], p, variant, j));
    return kron_vectors(parts, max_dim);
}

inline int total_excitation(const std::vector<PolaritonLabel>& labels) {
    int t = 0;
    for (const auto& l : labels) t += l.n;
    return t;
}

// ---------------------------------------------------- restricted spaces

/// Product basis of a tensor space, optionally restricted to the states whose
/// total excitation does not exceed a cap. Operators conserving excitation (or
/// lowering it) act exactly inside the restricted span.
class ProductBasis {
public:
    static ProductBasis make(TensorDims dims, std::vector<std::vector<int>> site_excitation,
                             std::optional<int> cap) {
        if (site_excitation.size() != dims.size()) throw SizeError("ProductBasis: excitation table mismatch");
        ProductBasis b;
        b.dims_ = std::move(dims);
        b.site_exc_ = std::move(site_excitation);
        b.cap_ = cap;
        Index full = 1;
        for (std::size_t k = 0; k < b.dims_.size(); ++k) full = checked_product(full, b.dims_[k], Index{1} << 40);
        if (full > (Index{1} << 26)) throw SizeError("ProductBasis: product space too large to enumerate");
        b.lookup_.assign(static_cast<std::size_t>(full), -1);
        std::vector<int> digits(b.dims_.size(), 0);
        for (Index f = 0; f < full; ++f) {
            b.decompose(f, digits);
            int exc = 0;
            for (std::size_t k = 0; k < digits.size(); ++k) exc += b.site_exc_[k][static_cast<std::size_t>(digits[k])];
            if (cap && exc > *cap) continue;
            b.lookup_[static_cast<std::size_t>(f)] = static_cast<Index>(b.full_.size());
            b.full_.push_back(f);
            b.exc_.push_back(exc);
        }
        return b;
    }

    Index dim() const noexcept { return static_cast<Index>(full_.size()); }
    const TensorDims& dims() const noexcept { return dims_; }
    std::optional<int> cap() const noexcept { return cap_; }
    bool is_full() const noexcept { return dim() == dims_.total(); }
    Index full_index(Index k) const { return full_.at(static_cast<std::size_t>(k)); }
    int excitation(Index k) const { return exc_.at(static_cast<std::size_t>(k)); }
    const std::vector<int>& excitations() const noexcept { return exc_; }

    /// Local index of a full-space index, or -1 if it is outside the span.
    Index local_index(Index full) const {
        if (full < 0 || full >= static_cast<Index>(lookup_.size())) return -1;
        return lookup_[static_cast<std::size_t>(full)];
    }

    void decompose(Index full, std::vector<int>& digits) const {
        digits.resize(dims_.size());
        for (std::size_t k = dims_.size(); k-- > 0;) {
            digits[k] = static_cast<int>(full % dims_[k]);
            full /= dims_[k];
        }
    }

    Index compose(const std::vector<int>& digits) const {
        Index f = 0;
        for (std::size_t k = 0; k < dims_.size(); ++k) f = f * dims_[k] + digits[k];
        return f;
    }

    /// Product state from per-site vectors; throws if weight falls outside the span.
    StateVector product_state(const std::vector<StateVector>& sites, double tol = 1e-12) const {
        if (sites.size() != dims_.size()) throw SizeError("product_state: one vector per site required");
        StateVector v(dim());
        std::vector<int> digits;
        double kept = 0.0, total = 1.0;
        for (std::size_t k = 0; k < sites.size(); ++k) {
            if (sites[k].size() != dims_[k]) throw SizeError("product_state: site vector dimension mismatch");
            total *= sites[k].squaredNorm();
        }
        for (Index k = 0; k < dim(); ++k) {
            decompose(full_[static_cast<std::size_t>(k)], digits);
            cplx amp{1.0, 0.0};
            for (std::size_t s = 0; s < digits.size(); ++s) amp *= sites[s](digits[s]);
            v(k) = amp;
            kept += std::norm(amp);
        }
        if (total - kept > tol) {
            throw TruncationError("product_state: state has weight " + std::to_string(total - kept) +
                                  " outside the excitation-capped space");
        }
        return v;
    }

    StateVector expand(const StateVector& local) const {
        if (local.size() != dim()) throw SizeError("expand: dimension mismatch");
        StateVector out = StateVector::Zero(dims_.total());
        for (Index k = 0; k < dim(); ++k) out(full_[static_cast<std::size_t>(k)]) = local(k);
        return out;
    }

    ComplexMatrix expand(const ComplexMatrix& local) const {
        if (local.rows() != dim() || local.cols() != dim()) throw SizeError("expand: dimension mismatch");
        ComplexMatrix out = ComplexMatrix::Zero(dims_.total(), dims_.total());
        for (Index i = 0; i < dim(); ++i)
            for (Index j = 0; j < dim(); ++j) out(full_[static_cast<std::size_t>(i)], full_[static_cast<std::size_t>(j)]) = local(i, j);
        return out;
    }

    /// P M P for a full-space operator M.
    ComplexMatrix restrict(const ComplexMatrix& full_op) const {
        if (full_op.rows() != dims_.total() || full_op.cols() != dims_.total()) {
            throw SizeError("restrict: operator does not act on the full product space");
        }
        ComplexMatrix out(dim(), dim());
        for (Index i = 0; i < dim(); ++i)
            for (Index j = 0; j < dim(); ++j)
                out(i, j) = full_op(full_[static_cast<std::size_t>(i)], full_[static_cast<std::size_t>(j)]);
        return out;
    }

private:
    TensorDims dims_;
    std::vector<std::vector<int>> site_exc_;
    std::optional<int> cap_;
    std::vector<Index> full_;
    std::vector<int> exc_;
    std::vector<Index> lookup_;
};

/// coeff * (x)_{(site, op)} op, identity elsewhere.
struct ProductTerm {
    cplx coeff{1.0, 0.0};
    std::vector<std::pair<std::size_t, ComplexMatrix>> factors;
};

/// Matrix of a sum of product terms, projected onto the basis span.
inline ComplexMatrix assemble(const ProductBasis& basis, const std::vector<ProductTerm>& terms,
                              Index max_dim = kDefaultMaxDim) {
    if (basis.dim() > max_dim) {
        throw SizeError("assemble: basis dimension " + std::to_string(basis.dim()) + " exceeds cap " +
                        std::to_string(max_dim));
    }
    const Index D = basis.dim();
    ComplexMatrix out = ComplexMatrix::Zero(D, D);
    struct Entry {
        int row;
        cplx val;
    };
    // per term, per factor, per column: nonzero rows
    std::vector<std::vector<std::vector<std::vector<Entry>>>> nz(terms.size());
    for (std::size_t t = 0; t < terms.size(); ++t) {
        for (const auto& [site, op] : terms[t].factors) {
            if (site >= basis.dims().size() || op.rows() != basis.dims()[site] || op.cols() != op.rows()) {
                throw SizeError("assemble: factor does not match site dimension");
            }
            std::vector<std::vector<Entry>> cols(static_cast<std::size_t>(op.cols()));
            for (Index c = 0; c < op.cols(); ++c)
                for (Index r = 0; r < op.rows(); ++r)
                    if (op(r, c) != cplx{}) cols[static_cast<std::size_t>(c)].push_back({static_cast<int>(r), op(r, c)});
            nz[t].push_back(std::move(cols));
        }
    }
    std::vector<int> digits, target;
    for (Index col = 0; col < D; ++col) {
        basis.decompose(basis.full_index(col), digits);
        for (std::size_t t = 0; t < terms.size(); ++t) {
            const auto& fac = terms[t].factors;
            // depth-first over the factors' nonzero rows
            target = digits;
            auto recurse = [&](auto&& self, std::size_t f, cplx amp) -> void {
                if (f == fac.size()) {
                    const Index row = basis.local_index(basis.compose(target));
                    if (row >= 0) out(row, col) += terms[t].coeff * amp;
                    return;
                }
                const std::size_t site = fac[f].first;
                const int keep = target[site];
                for (const auto& e : nz[t][f][static_cast<std::size_t>(digits[site])]) {
                    target[site] = e.row;
                    self(self, f + 1, amp * e.val);
                }
                target[site] = keep;
            };
            recurse(recurse, 0, cplx{1.0, 0.0});
        }
    }
    return out;
}

/// Hamiltonian, jump operators and basis for one model picture.
struct OpenSystem {
    ModelParams params;
    ModelVariant variant{ModelVariant::full};
    bool interconverting{false};
    std::vector<SiteModel> sites;
    ProductBasis basis;
    ComplexMatrix hamiltonian;
    std::vector<ComplexMatrix> collapse;
    std::vector<int> collapse_sites;

    TensorDims site_dims() const { return basis.dims(); }

    StateVector product_state(const std::vector<PolaritonLabel>& labels) const {
        if (labels.size() != static_cast<std::size_t>(params.n_sites)) {
            throw ContractError("product_state: need one label per site");
        }
        std::vector<StateVector> parts;
        for (int j = 0; j < params.n_sites; ++j) parts.push_back(site_state(labels[static_cast<std::size_t>(j)], params, variant, j));
        return basis.product_state(parts);
    }

    /// Total excitation operator (diagonal in every picture).
    ComplexMatrix excitation_operator() const {
        ComplexMatrix n = ComplexMatrix::Zero(basis.dim(), basis.dim());
        for (Index k = 0; k < basis.dim(); ++k) n(k, k) = basis.excitation(k);
        return n;
    }
};

/// Build the model on its product basis; `excitation_cap` restricts to states
/// with at most that many total excitations (exact for any initial state
/// inside the cap).
inline OpenSystem build_system(const ModelParams& p, ModelVariant variant,
                               std::optional<int> excitation_cap = std::nullopt,
                               bool include_interconverting = false, Index max_dim = kDefaultMaxDim) {
    p.validate();
    OpenSystem sys;
    sys.params = p;
    sys.variant = variant;
    sys.interconverting = include_interconverting;
    std::vector<std::vector<int>> exc;
    std::vector<Index> dims;
    for (int j = 0; j < p.n_sites; ++j) {
        sys.sites.push_back(site_model(p, variant, j, include_interconverting));
        exc.push_back(sys.sites.back().excitation);
        dims.push_back(sys.sites.back().dim());
    }
    if (!excitation_cap) check_dimension_cap(TensorDims(dims), max_dim);
    sys.basis = ProductBasis::make(TensorDims(dims), std::move(exc), excitation_cap);
    if (sys.basis.dim() > max_dim) {
        throw SizeError("build_system: dimension " + std::to_string(sys.basis.dim()) + " exceeds cap " +
                        std::to_string(max_dim));
    }

    std::vector<ProductTerm> terms;
    for (std::size_t j = 0; j < sys.sites.size(); ++j) terms.push_back({1.0, {{j, sys.sites[j].h}}});
    for (std::size_t j = 0; j + 1 < sys.sites.size(); ++j) {
        for (std::size_t part = 0; part < sys.sites[j].hop_parts.size(); ++part) {
            const ComplexMatrix& A = sys.sites[j].hop_parts[part];
            const ComplexMatrix& B = sys.sites[j + 1].hop_parts[part];
            terms.push_back({p.hop[j], {{j, A.adjoint()}, {j + 1, B}}});
            terms.push_back({p.hop[j], {{j, A}, {j + 1, B.adjoint()}}});
        }
    }
    sys.hamiltonian = assemble(sys.basis, terms, max_dim);
    for (std::size_t j = 0; j < sys.sites.size(); ++j) {
        const double gj = p.gamma[j];
        if (gj <= 0.0) continue;
        sys.collapse.push_back(assemble(sys.basis, {{std::sqrt(gj), {{j, sys.sites[j].loss}}}}, max_dim));
        sys.collapse_sites.push_back(static_cast<int>(j));
    }
    return sys;
}

}  // namespace jch
