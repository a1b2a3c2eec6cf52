#include "bpve/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bpve {

namespace {
constexpr std::uint64_t kRadix = 256;  // per-coordinate alphabet, cap <= 254
}

void EmpiricalDistribution::add(long long state) {
    if (state < 0) throw std::invalid_argument("negative state");
    if (state >= static_cast<long long>(counts_.size()))
        counts_.resize(static_cast<std::size_t>(state) + 1, 0);
    ++counts_[static_cast<std::size_t>(state)];
    ++total_;
}

void EmpiricalDistribution::merge_from(const EmpiricalDistribution& other) {
    if (other.counts_.size() > counts_.size()) counts_.resize(other.counts_.size(), 0);
    for (std::size_t i = 0; i < other.counts_.size(); ++i) counts_[i] += other.counts_[i];
    total_ += other.total_;
    overflow_ += other.overflow_;
}

long long EmpiricalDistribution::count(long long state) const {
    if (state < 0 || state >= static_cast<long long>(counts_.size())) return 0;
    return counts_[static_cast<std::size_t>(state)];
}

std::pair<std::vector<double>, double> EmpiricalDistribution::pmf(int cap) const {
    if (total_ == 0) throw std::logic_error("empty empirical distribution");
    std::vector<double> out(static_cast<std::size_t>(cap) + 1, 0.0);
    long long covered = 0;
    const double denom = static_cast<double>(total_);
    for (long long s = 0; s <= cap; ++s) {
        out[static_cast<std::size_t>(s)] = static_cast<double>(count(s)) / denom;
        covered += count(s);
    }
    return {std::move(out), static_cast<double>(total_ - covered) / denom};
}

std::uint64_t JointPmf::encode(std::span<const long long> tuple, int cap) {
    std::uint64_t key = 0;
    for (long long v : tuple) {
        const std::uint64_t digit =
            v > cap ? static_cast<std::uint64_t>(cap) + 1 : static_cast<std::uint64_t>(v);
        key = key * kRadix + digit;
    }
    return key;
}

void JointPmf::add(std::span<const long long> tuple, double mass) {
    if (static_cast<int>(tuple.size()) != dims_) throw std::invalid_argument("tuple arity");
    cells_[encode(tuple, cap_)] += mass;
}

JointPmf JointPmf::marginalize(int coordinate) const {
    if (coordinate < 0 || coordinate >= dims_) throw std::invalid_argument("bad coordinate");
    JointPmf out(dims_ - 1, cap_);
    std::vector<long long> tuple(static_cast<std::size_t>(dims_));
    for (const auto& [key, mass] : cells_) {
        std::uint64_t k = key;
        for (int d = dims_ - 1; d >= 0; --d) {
            tuple[static_cast<std::size_t>(d)] = static_cast<long long>(k % kRadix);
            k /= kRadix;
        }
        std::vector<long long> rest;
        rest.reserve(tuple.size() - 1);
        for (int d = 0; d < dims_; ++d)
            if (d != coordinate) rest.push_back(tuple[static_cast<std::size_t>(d)]);
        out.add(rest, mass);
    }
    return out;
}

std::pair<std::vector<double>, double> JointPmf::marginal(int coordinate) const {
    if (coordinate < 0 || coordinate >= dims_) throw std::invalid_argument("bad coordinate");
    std::vector<double> out(static_cast<std::size_t>(cap_) + 1, 0.0);
    double tail = 0.0;
    for (const auto& [key, mass] : cells_) {
        std::uint64_t k = key;
        long long v = 0;
        for (int d = dims_ - 1; d >= 0; --d) {
            const long long digit = static_cast<long long>(k % kRadix);
            if (d == coordinate) v = digit;
            k /= kRadix;
        }
        if (v > cap_)
            tail += mass;
        else
            out[static_cast<std::size_t>(v)] += mass;
    }
    return {std::move(out), tail};
}

void JointEmpirical::add(std::span<const long long> tuple) {
    if (static_cast<int>(tuple.size()) != dims_) throw std::invalid_argument("tuple arity");
    ++cells_[JointPmf::encode(tuple, cap_)];
    ++total_;
}

void JointEmpirical::merge_from(const JointEmpirical& other) {
    for (const auto& [key, cnt] : other.cells_) cells_[key] += cnt;
    total_ += other.total_;
}

double total_variation(std::span<const double> p, double p_tail, std::span<const double> q,
                       double q_tail) {
    double psum = p_tail, qsum = q_tail;
    for (double v : p) psum += v;
    for (double v : q) qsum += v;
    if (std::abs(psum - 1.0) > 1e-6 || std::abs(qsum - 1.0) > 1e-6)
        throw std::invalid_argument("total_variation requires normalized inputs");
    const std::size_t n = std::max(p.size(), q.size());
    double acc = std::abs(p_tail - q_tail);
    for (std::size_t i = 0; i < n; ++i) {
        const double pv = i < p.size() ? p[i] : 0.0;
        const double qv = i < q.size() ? q[i] : 0.0;
        acc += std::abs(pv - qv);
    }
    return 0.5 * acc;
}

double total_variation(const TruncatedSeries& p, const TruncatedSeries& q) {
    return total_variation(p.coeffs(), p.tail_mass(), q.coeffs(), q.tail_mass());
}

double total_variation(const TruncatedSeries& exact, const EmpiricalDistribution& mc) {
    auto [freq, tail] = mc.pmf(exact.order());
    return total_variation(exact.coeffs(), exact.tail_mass(), freq, tail);
}

double total_variation(const JointPmf& exact, const JointEmpirical& mc) {
    if (mc.total() == 0) throw std::logic_error("empty empirical joint");
    const double denom = static_cast<double>(mc.total());
    double acc = 0.0;
    auto pe = exact.cells().begin();
    auto pm = mc.cells().begin();
    while (pe != exact.cells().end() || pm != mc.cells().end()) {
        if (pm == mc.cells().end() || (pe != exact.cells().end() && pe->first < pm->first)) {
            acc += std::abs(pe->second);
            ++pe;
        } else if (pe == exact.cells().end() || pm->first < pe->first) {
            acc += static_cast<double>(pm->second) / denom;
            ++pm;
        } else {
            acc += std::abs(pe->second - static_cast<double>(pm->second) / denom);
            ++pe;
            ++pm;
        }
    }
    return 0.5 * acc;
}

double tv_confidence_radius(long long total, long long support_size) {
    if (total < 1) throw std::invalid_argument("sample size must be >= 1");
    const double r = std::sqrt(static_cast<double>(support_size) / (2.0 * static_cast<double>(total)));
    return std::min(1.0, r);
}

JointPmf joint_pmf_from_kernels(const TruncatedSeries& initial,
                                const std::vector<std::vector<TruncatedSeries>>& kernels,
                                int cap) {
    if (cap > initial.order()) throw std::invalid_argument("cap exceeds truncation order");
    const int dims = static_cast<int>(kernels.size()) + 1;
    JointPmf out(dims, cap);
    std::vector<long long> tuple(static_cast<std::size_t>(dims), 0);

    // Depth-first over tuples; mass above cap at any leg escapes for the rest
    // of the tuple.
    struct Walker {
        const std::vector<std::vector<TruncatedSeries>>& kernels;
        JointPmf& out;
        int cap;
        std::vector<long long>& tuple;

        void escape(int depth, double mass) {
            for (std::size_t d = static_cast<std::size_t>(depth); d < tuple.size(); ++d)
                tuple[d] = cap + 1;
            out.add(tuple, mass);
        }

        void walk(int depth, long long state, double mass) {
            if (mass <= 0.0) return;
            tuple[static_cast<std::size_t>(depth)] = state;
            if (depth == static_cast<int>(kernels.size())) {
                out.add(tuple, mass);
                return;
            }
            const auto& row = kernels[static_cast<std::size_t>(depth)][static_cast<std::size_t>(state)];
            double seen = 0.0;
            for (long long next = 0; next <= cap; ++next) {
                const double p = row.coeff(static_cast<int>(next));
                seen += p;
                walk(depth + 1, next, mass * p);
            }
            const double rest = mass * std::max(0.0, 1.0 - seen);
            if (rest > 0.0) escape(depth + 1, rest);
        }
    } walker{kernels, out, cap, tuple};

    double seen = 0.0;
    for (long long s = 0; s <= cap; ++s) {
        const double p = initial.coeff(static_cast<int>(s));
        seen += p;
        walker.walk(0, s, p);
    }
    const double rest = std::max(0.0, 1.0 - seen);
    if (rest > 0.0) walker.escape(0, rest);
    return out;
}

}  // namespace bpve
