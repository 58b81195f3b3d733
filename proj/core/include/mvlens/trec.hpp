#pragma once

#include <filesystem>
#include <iosfwd>
#include <string_view>

#include "mvlens/metrics.hpp"
#include "mvlens/scoring.hpp"

namespace mvlens {

/// Writes `query_id Q0 chunk_id rank score tag` lines, scores with six
/// decimals, queries in run order.
void write_run(std::ostream& out, const RetrievalRun& run, std::string_view tag);
void write_run(const std::filesystem::path& path, const RetrievalRun& run,
               std::string_view tag);

/// Reads a TREC run. Queries keep first-appearance order; each list is
/// ordered by its rank column. The chunk table holds every chunk id seen, in
/// first-appearance order. Throws MalformedRunFile.
RetrievalRun read_run(std::istream& in);
RetrievalRun read_run(const std::filesystem::path& path);

/// Reads `query_id iteration chunk_id grade` lines. Throws MalformedQrels.
Qrels read_qrels(std::istream& in);
Qrels read_qrels(const std::filesystem::path& path);

void write_qrels(std::ostream& out, const Qrels& qrels);
void write_qrels(const std::filesystem::path& path, const Qrels& qrels);

}  // namespace mvlens
