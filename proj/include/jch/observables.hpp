// observables.hpp - polariton populations, negativity and the peak classifier

#pragma once

#include "jch/dynamics.hpp"
#include "jch/linalg.hpp"
#include "jch/model.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace jch {

// ------------------------------------------------------------ projectors

/// Product-state projector; a named preset such as "P20" or "P111" reads one
/// digit per site, digit n meaning the lower polariton n- and 0 the ground state.
struct ProjectorSpec {
    std::vector<PolaritonLabel> labels;
    bool symmetrize{false};  // sum over the distinct site permutations
    std::string name;

    static ProjectorSpec preset(std::string_view preset_name, bool symmetrize = false) {
        if (preset_name.size() < 2 || preset_name[0] != 'P') {
            throw ConfigError("projector preset '" + std::string(preset_name) + "' must look like P20, P111, ...");
        }
        ProjectorSpec s;
        s.symmetrize = symmetrize;
        s.name = std::string(preset_name);
        for (char c : preset_name.substr(1)) {
            if (c < '0' || c > '9') throw ConfigError("projector preset '" + std::string(preset_name) + "': bad digit");
            const int n = c - '0';
            s.labels.push_back(n == 0 ? PolaritonLabel::ground() : PolaritonLabel::minus(n));
        }
        return s;
    }

    static ProjectorSpec from_labels(std::vector<PolaritonLabel> labels, bool symmetrize = false) {
        ProjectorSpec s;
        s.labels = std::move(labels);
        s.symmetrize = symmetrize;
        s.name = "P(";
        for (std::size_t k = 0; k < s.labels.size(); ++k) s.name += (k ? "," : "") + s.labels[k].str();
        s.name += ")";
        return s;
    }

    /// Column name used in CSV output.
    std::string column() const { return symmetrize ? name + "_sym" : name; }
};

inline bool label_less(const PolaritonLabel& a, const PolaritonLabel& b) {
    if (a.n != b.n) return a.n < b.n;
    return static_cast<int>(a.branch) < static_cast<int>(b.branch);
}

/// Distinct site permutations of `labels` (the labels themselves first).
inline std::vector<std::vector<PolaritonLabel>> permutation_images(const std::vector<PolaritonLabel>& labels) {
    std::vector<PolaritonLabel> sorted = labels;
    std::sort(sorted.begin(), sorted.end(), label_less);
    std::vector<std::vector<PolaritonLabel>> out{labels};
    do {
        if (!(sorted == labels)) out.push_back(sorted);
    } while (std::next_permutation(sorted.begin(), sorted.end(), label_less));
    return out;
}

inline ProjectorObservable make_projector(const ProjectorSpec& spec, const OpenSystem& sys) {
    if (spec.labels.size() != static_cast<std::size_t>(sys.params.n_sites)) {
        throw ContractError("projector " + spec.name + ": " + std::to_string(spec.labels.size()) +
                            " labels for " + std::to_string(sys.params.n_sites) + " sites");
    }
    ProjectorObservable obs;
    obs.name = spec.column();
    if (spec.symmetrize) {
        for (const auto& img : permutation_images(spec.labels)) obs.vectors.push_back(sys.product_state(img));
    } else {
        obs.vectors.push_back(sys.product_state(spec.labels));
    }
    return obs;
}

inline double clamp_probability(double p) {
    if (p < -1e-10 || p > 1.0 + 1e-10) {
        if (std::isfinite(p)) {
            throw DomainError("population " + format_double(p) + " outside [0, 1]");
        }
    }
    return std::clamp(p, 0.0, 1.0);
}

inline double population(const StateVector& psi, const ProjectorObservable& p) {
    for (const auto& v : p.vectors)
        if (v.size() != psi.size()) throw SizeError("population: dimension mismatch");
    return clamp_probability(p.expect(psi));
}

inline double population(const DensityMatrix& rho, const ProjectorObservable& p) {
    for (const auto& v : p.vectors)
        if (v.size() != rho.rows() || rho.rows() != rho.cols()) throw SizeError("population: dimension mismatch");
    return clamp_probability(p.expect(rho));
}

// ------------------------------------------------------------ negativity

/// Sum of |negative eigenvalues| of the partial transpose on the second factor.
inline double negativity(const DensityMatrix& rho, const TensorDims& dims) {
    if (dims.size() != 2) throw SizeError("negativity: exactly two tensor factors required");
    if (rho.rows() != rho.cols() || dims.total() != rho.rows()) throw SizeError("negativity: dims do not match rho");
    if (hermiticity_error(rho) > 1e-8) throw ContractError("negativity: rho not Hermitian");
    const ComplexMatrix sym = 0.5 * (rho + rho.adjoint());
    double acc = 0.0;
    for (double ev : hermitian_eigenvalues(partial_transpose(sym, dims, 1)))
        if (ev < 0.0) acc -= ev;
    return acc;
}

/// Regroup an N-site operator as left|right across `cut` (sites [0, cut) | [cut, N)).
inline std::pair<DensityMatrix, TensorDims> reduced_bipartition(const DensityMatrix& rho, const TensorDims& site_dims,
                                                                std::size_t cut) {
    if (cut < 1 || cut >= site_dims.size()) throw ContractError("reduced_bipartition: need 1 <= cut < N");
    if (rho.rows() != rho.cols() || rho.rows() != site_dims.total()) throw SizeError("reduced_bipartition: dims mismatch");
    Index left = 1, right = 1;
    for (std::size_t k = 0; k < cut; ++k) left *= site_dims[k];
    for (std::size_t k = cut; k < site_dims.size(); ++k) right *= site_dims[k];
    return {rho, TensorDims{left, right}};
}

/// Left/right coordinates of the basis states of a (possibly excitation-capped)
/// product basis across a cut. Only the left and right parts that occur are
/// kept, so operators on the cut stay small.
struct CutIndex {
    std::vector<Index> left, right;  // per basis state
    Index n_left{0}, n_right{0};
};

inline CutIndex cut_index(const ProductBasis& basis, std::size_t cut) {
    const TensorDims& d = basis.dims();
    if (cut < 1 || cut >= d.size()) throw ContractError("negativity: need 1 <= cut < N");
    std::map<Index, Index> lmap, rmap;
    std::vector<Index> lraw(static_cast<std::size_t>(basis.dim())), rraw(lraw.size());
    std::vector<int> digits;
    for (Index k = 0; k < basis.dim(); ++k) {
        basis.decompose(basis.full_index(k), digits);
        Index l = 0, r = 0;
        for (std::size_t s = 0; s < cut; ++s) l = l * d[s] + digits[s];
        for (std::size_t s = cut; s < d.size(); ++s) r = r * d[s] + digits[s];
        lraw[static_cast<std::size_t>(k)] = l;
        rraw[static_cast<std::size_t>(k)] = r;
        lmap.emplace(l, 0);
        rmap.emplace(r, 0);
    }
    Index c = 0;
    for (auto& [key, v] : lmap) v = c++;
    c = 0;
    for (auto& [key, v] : rmap) v = c++;
    CutIndex out;
    out.n_left = static_cast<Index>(lmap.size());
    out.n_right = static_cast<Index>(rmap.size());
    for (std::size_t k = 0; k < lraw.size(); ++k) {
        out.left.push_back(lmap[lraw[k]]);
        out.right.push_back(rmap[rraw[k]]);
    }
    return out;
}

/// Negativity across `cut` for rho written on `basis`.
inline double negativity(const DensityMatrix& rho, const ProductBasis& basis, std::size_t cut) {
    if (rho.rows() != basis.dim() || rho.cols() != basis.dim()) throw SizeError("negativity: rho does not match basis");
    if (hermiticity_error(rho) > 1e-8) throw ContractError("negativity: rho not Hermitian");
    const CutIndex ci = cut_index(basis, cut);
    const Index R = ci.n_right;
    ComplexMatrix pt = ComplexMatrix::Zero(ci.n_left * R, ci.n_left * R);
    for (Index i = 0; i < rho.rows(); ++i) {
        const Index l1 = ci.left[static_cast<std::size_t>(i)], r1 = ci.right[static_cast<std::size_t>(i)];
        for (Index j = 0; j < rho.cols(); ++j) {
            const Index l2 = ci.left[static_cast<std::size_t>(j)], r2 = ci.right[static_cast<std::size_t>(j)];
            pt(l1 * R + r2, l2 * R + r1) = 0.5 * (rho(i, j) + std::conj(rho(j, i)));
        }
    }
    double acc = 0.0;
    for (double ev : hermitian_eigenvalues(pt))
        if (ev < 0.0) acc -= ev;
    return acc;
}

/// Pure-state negativity from the Schmidt coefficients: ((sum s)^2 - 1) / 2.
inline double negativity_pure(const StateVector& psi, const ProductBasis& basis, std::size_t cut) {
    if (psi.size() != basis.dim()) throw SizeError("negativity_pure: state does not match basis");
    const CutIndex ci = cut_index(basis, cut);
    ComplexMatrix m = ComplexMatrix::Zero(ci.n_left, ci.n_right);
    for (Index k = 0; k < psi.size(); ++k) m(ci.left[static_cast<std::size_t>(k)], ci.right[static_cast<std::size_t>(k)]) = psi(k);
    const double nrm = psi.squaredNorm();
    if (!(nrm > 0.0)) throw ContractError("negativity_pure: zero state");
    const Eigen::VectorXd s = Eigen::JacobiSVD<ComplexMatrix>(m).singularValues();
    const double sum = s.sum();
    return std::max(0.0, 0.5 * (sum * sum / nrm - 1.0));
}

// ------------------------------------------------------- peak classifier

enum class PeakClass { NoPeak, SinglePeak, MultiPeak };

inline std::string to_string(PeakClass c) {
    switch (c) {
        case PeakClass::NoPeak: return "NoPeak";
        case PeakClass::SinglePeak: return "SinglePeak";
        case PeakClass::MultiPeak: return "MultiPeak";
    }
    return "?";
}

struct PeakReport {
    std::vector<double> peak_times;
    std::vector<double> peak_heights;
    std::vector<double> prominences;
    PeakClass classification{PeakClass::NoPeak};
    double global_max{0.0};
    double prominence_threshold{0.0};  // absolute: fraction * global_max

    std::size_t count() const noexcept { return peak_times.size(); }
    std::string label() const {
        if (classification == PeakClass::MultiPeak) return "MultiPeak(" + std::to_string(count()) + ")";
        return to_string(classification);
    }
    /// Height of the tallest reported peak (0 without peaks).
    double max_height() const {
        double h = 0.0;
        for (double x : peak_heights) h = std::max(h, x);
        return h;
    }
};

/// Peaks are local maxima (flat tops count once, at their middle sample) whose
/// topographic prominence reaches prominence_fraction * global max. Endpoints
/// never count.
inline PeakReport find_peaks(const std::vector<double>& series, const std::vector<double>& times,
                             double prominence_fraction) {
    if (series.size() != times.size()) throw SizeError("find_peaks: series and times differ in length");
    if (!(prominence_fraction >= 0.0)) throw ContractError("find_peaks: prominence threshold must be >= 0");
    PeakReport rep;
    const std::size_t n = series.size();
    for (double v : series) {
        if (!std::isfinite(v)) throw ContractError("find_peaks: non-finite value");
        if (v < -1e-12) throw ContractError("find_peaks: series must be non-negative");
    }
    if (n == 0) return rep;
    rep.global_max = *std::max_element(series.begin(), series.end());
    rep.prominence_threshold = prominence_fraction * rep.global_max;
    if (!(rep.global_max > 0.0)) return rep;

    std::size_t i = 1;
    while (i + 1 < n) {
        if (series[i - 1] < series[i]) {
            std::size_t ahead = i + 1;
            while (ahead + 1 < n && series[ahead] == series[i]) ++ahead;
            if (series[ahead] < series[i]) {
                const std::size_t peak = (i + ahead - 1) / 2;
                const double h = series[peak];
                double lmin = h;
                for (std::size_t k = i; k-- > 0;) {
                    if (series[k] > h) break;
                    lmin = std::min(lmin, series[k]);
                }
                double rmin = h;
                for (std::size_t k = ahead; k < n; ++k) {
                    if (series[k] > h) break;
                    rmin = std::min(rmin, series[k]);
                }
                const double prom = h - std::max(lmin, rmin);
                if (prom >= rep.prominence_threshold && prom > 0.0) {
                    rep.peak_times.push_back(times[peak]);
                    rep.peak_heights.push_back(h);
                    rep.prominences.push_back(prom);
                }
                i = ahead;
                continue;
            }
            i = ahead;
            continue;
        }
        ++i;
    }
    rep.classification = rep.peak_times.empty() ? PeakClass::NoPeak
                         : rep.peak_times.size() == 1 ? PeakClass::SinglePeak
                                                      : PeakClass::MultiPeak;
    return rep;
}

/// Centered moving average over `width` time units (odd sample count, valid
/// part only: the output is shorter than the input, no edge padding).
inline std::pair<std::vector<double>, std::vector<double>> boxcar_smooth(const std::vector<double>& times,
                                                                         const std::vector<double>& series,
                                                                         double width) {
    if (times.size() != series.size()) throw SizeError("boxcar_smooth: length mismatch");
    if (times.size() < 2 || !(width > 0.0)) return {times, series};
    const double step = times[1] - times[0];
    long w = std::lround(width / step);
    if (w % 2 == 0) ++w;
    if (w <= 1) return {times, series};
    const std::size_t W = static_cast<std::size_t>(w);
    if (W > series.size()) return {{}, {}};
    std::vector<double> t, s;
    const std::size_t half = W / 2;
    for (std::size_t c = half; c + half < series.size(); ++c) {
        double acc = 0.0;
        for (std::size_t k = c - half; k <= c + half; ++k) acc += series[k];
        t.push_back(times[c]);
        s.push_back(acc / static_cast<double>(W));
    }
    return {t, s};
}

struct ClassifierOptions {
    double prominence{0.05};
    double t_min{1.0};
    std::optional<double> smoothing_width;  // time units; nullopt = none

    /// One blockade period 2 pi / |E_2- + E_0 - 2 E_1-|, the period of the fast
    /// ripple riding on the negativity.
    static double blockade_period(double delta, double g = 1.0) {
        const double m = std::abs(blockade_mismatch(delta, g));
        if (!(m > 0.0)) throw DomainError("blockade_period: vanishing blockade mismatch");
        return 2.0 * std::acos(-1.0) / m;
    }
};

/// Smoothing, then burn-in, then find_peaks.
inline PeakReport classify_series(const std::vector<double>& times, const std::vector<double>& series,
                                  const ClassifierOptions& opt) {
    auto [t, s] = opt.smoothing_width ? boxcar_smooth(times, series, *opt.smoothing_width)
                                      : std::pair{times, series};
    std::vector<double> tt, ss;
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (t[k] < opt.t_min) continue;
        tt.push_back(t[k]);
        ss.push_back(std::max(0.0, s[k]));
    }
    return find_peaks(ss, tt, opt.prominence);
}

/// Classification of an ensemble's negativity; uses a precomputed
/// "negativity" series if present, otherwise rho_avg on `basis`.
inline PeakReport classify_peak_structure(const EnsembleResult& ens, const ClassifierOptions& opt,
                                          const ProductBasis* basis = nullptr, std::size_t cut = 1) {
    auto it = ens.mean.find("negativity");
    if (it != ens.mean.end()) return classify_series(ens.times, it->second, opt);
    if (ens.rho_avg.empty() || basis == nullptr) {
        throw ContractError("classify_peak_structure: ensemble carries neither rho_avg nor a negativity series");
    }
    std::vector<double> neg;
    for (const auto& r : ens.rho_avg) neg.push_back(negativity(r, *basis, cut));
    return classify_series(ens.times, neg, opt);
}

}  // namespace jch
