#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvlens/lengthbias.hpp"
#include "mvlens/metrics.hpp"
#include "mvlens/simdist.hpp"
#include "mvlens/synthlab.hpp"

namespace mvlens::cli {

using Json = nlohmann::ordered_json;

inline constexpr int kFormatVersion = 1;

/// Shortest round-trip text for a double; "nan" for non-finite values.
std::string format_double(double x);

/// JSON number, or null for non-finite values.
Json json_number(double x);

/// Output envelope shared by every artifact: format version, command, and
/// the fully resolved configuration.
Json envelope(std::string_view command, const Json& config);

/// One `# mvlens ...` comment line embedding the envelope in a CSV file.
std::string csv_preamble(std::string_view command, const Json& config);

void write_text(const std::filesystem::path& path, std::string_view text);

/// Writes `prefix.json` and `prefix.csv`.
void write_outputs(const std::filesystem::path& prefix, const Json& json,
                   std::string_view csv);

Json to_json(const MetricReport& report);
std::string to_csv(const MetricReport& report);

Json to_json(const FPLengthReport& report);
std::string to_csv(const FPLengthReport& report);

Json to_json(const BinReport& report);
std::string to_csv(const BinReport& report);

Json to_json(const SimCurve& curve);
Json to_json(const SimDistReport& report);
std::string to_csv(const SimDistReport& report);

Json to_json(const SynthConfig& config);
Json to_json(const MonotonicityResult& result);
Json to_json(const std::vector<SweepRow>& rows);
std::string to_csv(const std::vector<SweepRow>& rows);

/// Dataset label used for pooled curves in simdist output.
inline constexpr std::string_view kPooledDataset = "__all__";

}  // namespace mvlens::cli
