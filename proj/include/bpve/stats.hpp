#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "bpve/truncated_series.hpp"

namespace bpve {

/// State -> count table over nonnegative integers with an overflow bucket for
/// discarded/capped samples. Counts are integers, so merges are exact and
/// order-independent.
class EmpiricalDistribution {
public:
    void add(long long state);
    void add_overflow() { ++overflow_; ++total_; }
    void merge_from(const EmpiricalDistribution& other);

    long long total() const { return total_; }
    long long overflow_count() const { return overflow_; }
    long long count(long long state) const;
    long long max_state() const { return static_cast<long long>(counts_.size()) - 1; }

    /// Frequencies for states 0..cap; mass above cap plus overflow goes to
    /// the returned tail.
    std::pair<std::vector<double>, double> pmf(int cap) const;

private:
    std::vector<long long> counts_;
    long long total_ = 0;
    long long overflow_ = 0;
};

/// Exact joint pmf over tuples of states at a fixed number of time points,
/// encoded on a clipped state alphabet 0..cap plus one escape symbol.
class JointPmf {
public:
    JointPmf(int dims, int cap) : dims_(dims), cap_(cap) {}

    int dims() const { return dims_; }
    int cap() const { return cap_; }
    void add(std::span<const long long> tuple, double mass);
    const std::map<std::uint64_t, double>& cells() const { return cells_; }

    /// Sums out one coordinate, producing a joint on the remaining ones.
    JointPmf marginalize(int coordinate) const;

    /// Marginal pmf of one coordinate over 0..cap (+tail).
    std::pair<std::vector<double>, double> marginal(int coordinate) const;

    static std::uint64_t encode(std::span<const long long> tuple, int cap);

private:
    int dims_;
    int cap_;
    std::map<std::uint64_t, double> cells_;
};

/// Empirical counterpart of JointPmf with integer counts.
class JointEmpirical {
public:
    JointEmpirical() = default;
    JointEmpirical(int dims, int cap) : dims_(dims), cap_(cap) {}

    void add(std::span<const long long> tuple);
    void merge_from(const JointEmpirical& other);
    long long total() const { return total_; }
    int dims() const { return dims_; }
    int cap() const { return cap_; }
    const std::map<std::uint64_t, long long>& cells() const { return cells_; }

private:
    int dims_ = 1;
    int cap_ = 64;
    std::map<std::uint64_t, long long> cells_;
    long long total_ = 0;
};

/// Total variation distance over states plus the tail treated as one extra
/// state. Both inputs must be normalized within 1e-6.
double total_variation(std::span<const double> p, double p_tail, std::span<const double> q,
                       double q_tail);
double total_variation(const TruncatedSeries& p, const TruncatedSeries& q);
double total_variation(const TruncatedSeries& exact, const EmpiricalDistribution& mc);
double total_variation(const JointPmf& exact, const JointEmpirical& mc);

/// Radius r with empirical-vs-true TV <= r at >= 99% confidence for the given
/// sample size over a support of the given size: sqrt(support/(2 total)),
/// capped at 1.
double tv_confidence_radius(long long total, long long support_size);

/// Exact joint law over tuples at consecutive time points: initial pmf pushed
/// through per-leg transition kernels (kernel[leg][state] = next-state pmf).
/// Mass escaping above cap is routed to the escape symbol for the remaining
/// coordinates.
JointPmf joint_pmf_from_kernels(const TruncatedSeries& initial,
                                const std::vector<std::vector<TruncatedSeries>>& kernels,
                                int cap);

}  // namespace bpve
