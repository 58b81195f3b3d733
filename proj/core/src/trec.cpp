#include "mvlens/trec.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "mvlens/error.hpp"

namespace mvlens {
namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) fields.push_back(line.substr(i, j - i));
    i = j;
  }
  return fields;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

bool parse_double(std::string_view s, double& out) {
  // from_chars for double is unavailable on older libstdc++.
  std::string tmp(s);
  char* end = nullptr;
  out = std::strtod(tmp.c_str(), &end);
  return end == tmp.c_str() + tmp.size() && !tmp.empty();
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return in;
}

}  // namespace

void write_run(std::ostream& out, const RetrievalRun& run, std::string_view tag) {
  char score[64];
  for (const auto& list : run.lists()) {
    for (std::size_t r = 0; r < list.entries.size(); ++r) {
      std::snprintf(score, sizeof(score), "%.6f", list.entries[r].score);
      out << list.query_id << " Q0 " << run.chunk_id(list.entries[r].chunk)
          << ' ' << (r + 1) << ' ' << score << ' ' << tag << '\n';
    }
  }
}

void write_run(const std::filesystem::path& path, const RetrievalRun& run,
               std::string_view tag) {
  auto out = open_out(path);
  write_run(out, run, tag);
  if (!out) throw Error(ErrorCode::Io, "short write to " + path.string());
}

RetrievalRun read_run(std::istream& in) {
  struct Row {
    std::size_t rank;
    std::size_t line;
    ScoredEntry entry;
  };
  std::vector<std::string> chunk_ids;
  std::unordered_map<std::string, ChunkIndex> chunk_index;
  std::vector<std::string> query_order;
  std::unordered_map<std::string, std::vector<Row>> rows;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto f = split_ws(line);
    if (f.empty()) continue;
    auto bad = [&](const std::string& why) {
      throw Error(ErrorCode::MalformedRunFile,
                  "run line " + std::to_string(line_no) + ": " + why);
    };
    if (f.size() != 6) bad("expected 6 fields, got " + std::to_string(f.size()));
    Row row{};
    row.line = line_no;
    if (!parse_number(f[3], row.rank)) bad("rank is not an integer");
    if (!parse_double(f[4], row.entry.score)) bad("score is not a number");
    std::string chunk(f[2]);
    auto [it, inserted] =
        chunk_index.emplace(chunk, static_cast<ChunkIndex>(chunk_ids.size()));
    if (inserted) chunk_ids.push_back(std::move(chunk));
    row.entry.chunk = it->second;
    std::string qid(f[0]);
    auto& bucket = rows[qid];
    if (bucket.empty()) query_order.push_back(std::move(qid));
    bucket.push_back(row);
  }

  std::vector<ScoredList> lists;
  lists.reserve(query_order.size());
  std::unordered_set<ChunkIndex> seen;
  for (auto& qid : query_order) {
    auto& bucket = rows[qid];
    std::stable_sort(bucket.begin(), bucket.end(),
                     [](const Row& a, const Row& b) { return a.rank < b.rank; });
    ScoredList list;
    list.query_id = qid;
    list.entries.reserve(bucket.size());
    seen.clear();
    for (const auto& r : bucket) {
      if (!seen.insert(r.entry.chunk).second) {
        throw Error(ErrorCode::MalformedRunFile,
                    "run line " + std::to_string(r.line) + ": chunk '" +
                        chunk_ids[r.entry.chunk] + "' repeated for query '" +
                        qid + "'");
      }
      list.entries.push_back(r.entry);
    }
    lists.push_back(std::move(list));
  }
  return RetrievalRun(std::move(chunk_ids), std::move(lists), 0);
}

RetrievalRun read_run(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_run(in);
}

Qrels read_qrels(std::istream& in) {
  Qrels qrels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto f = split_ws(line);
    if (f.empty()) continue;
    auto bad = [&](const std::string& why) {
      throw Error(ErrorCode::MalformedQrels,
                  "qrels line " + std::to_string(line_no) + ": " + why);
    };
    if (f.size() != 4) bad("expected 4 fields, got " + std::to_string(f.size()));
    int grade = 0;
    if (!parse_number(f[3], grade)) bad("grade is not an integer");
    if (grade < 0) bad("grade is negative");
    qrels.set(std::string(f[0]), std::string(f[2]), grade);
  }
  return qrels;
}

Qrels read_qrels(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_qrels(in);
}

void write_qrels(std::ostream& out, const Qrels& qrels) {
  for (const auto& [qid, grades] : qrels.queries()) {
    for (const auto& [cid, g] : grades) out << qid << " 0 " << cid << ' ' << g << '\n';
  }
}

void write_qrels(const std::filesystem::path& path, const Qrels& qrels) {
  auto out = open_out(path);
  write_qrels(out, qrels);
  if (!out) throw Error(ErrorCode::Io, "short write to " + path.string());
}

}  // namespace mvlens
