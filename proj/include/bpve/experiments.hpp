#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bpve/config.hpp"
#include "bpve/stats.hpp"

namespace bpve {

struct CheckRecord {
    std::string name;
    double value = 0.0;      // TV distance, residual, or measured quantity
    double tolerance = 0.0;  // pass iff value <= tolerance
    double confidence_radius = 0.0;  // 0 for exact checks
    double tail_mass = 0.0;
    long long samples = 0;  // 0 for exact checks
    bool passed = false;
    double runtime_s = 0.0;
    std::string detail;
};

struct VerificationReport {
    std::string experiment;
    std::string scenario;
    std::uint64_t seed = 0;
    std::string config_digest;
    std::vector<CheckRecord> checks;

    bool all_passed() const;
};

/// Writes pmf_<check>.csv tables and the aggregated report. Float formatting
/// is fixed ("%.12g"), so identical runs produce byte-identical CSV output.
class ReportWriter {
public:
    ReportWriter(std::filesystem::path dir, std::string format);

    struct PmfRow {
        long long state = 0;
        std::optional<double> exact;
        std::optional<double> limit;
        std::optional<double> mc;
        std::optional<double> mc_ci_radius;
    };

    void write_pmf(const std::string& check, const std::vector<PmfRow>& rows) const;
    void write_diagnostics(const std::vector<std::pair<std::string, double>>& rows) const;
    void write_reports(const std::vector<VerificationReport>& reports) const;

    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
    std::string format_;  // "json" or "csv"
};

VerificationReport run_yaglom(const ScenarioConfig& config, const ReportWriter* out = nullptr);
VerificationReport run_theorem1_fdd(const ScenarioConfig& config, const ReportWriter* out = nullptr);
VerificationReport run_entrance_law(const ScenarioConfig& config, const ReportWriter* out = nullptr);
VerificationReport run_theorem2(const ScenarioConfig& config, const ReportWriter* out = nullptr);
VerificationReport run_reverse(const ScenarioConfig& config, const ReportWriter* out = nullptr);
VerificationReport run_diagnostics(const ScenarioConfig& config, const ReportWriter* out = nullptr);
VerificationReport run_limit_simulators(const ScenarioConfig& config,
                                        const ReportWriter* out = nullptr);

/// Runs every experiment applicable to the config (theorem2 requires
/// immigration and is skipped otherwise).
std::vector<VerificationReport> run_all(const ScenarioConfig& config,
                                        const ReportWriter* out = nullptr);

void print_report(const VerificationReport& report);

}  // namespace bpve
