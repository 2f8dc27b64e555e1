#include "hoi/common.hpp"

#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace hoi {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

Rng::Rng(std::uint64_t seed) {
  // Seed expansion via splitmix64, as recommended for xoshiro generators.
  std::uint64_t x = seed;
  for (auto& w : s_) {
    x = splitmix64(x);
    w = x;
  }
}

Rng Rng::derive(std::uint64_t master_seed, const std::string& stream,
                std::uint64_t index) {
  std::uint64_t mix = splitmix64(master_seed ^ fnv1a64(stream));
  return Rng(splitmix64(mix + 0x9E3779B97F4A7C15ull * (index + 1)));
}

static inline std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  // One-shot Box-Muller; the sine mate is discarded to keep the stream
  // stateless between calls.
  double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

double Rng::normal(double mean, double std) { return mean + std * normal(); }

std::uint64_t Rng::uniform_int(std::uint64_t n) {
  if (n == 0) throw ContractError("uniform_int: n must be positive");
  // Rejection sampling to avoid modulo bias.
  std::uint64_t threshold = (~n + 1) % n;  // (2^64 - n) mod n
  for (;;) {
    std::uint64_t r = next_u64();
    if (r >= threshold) return r % n;
  }
}

double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  if (a > kPi) a -= 2.0 * kPi;
  return a;
}

double min_jerk(double tau) {
  if (tau <= 0.0) return 0.0;
  if (tau >= 1.0) return 1.0;
  double t3 = tau * tau * tau;
  return t3 * (10.0 + tau * (-15.0 + 6.0 * tau));
}

double min_jerk_vel(double tau) {
  if (tau <= 0.0 || tau >= 1.0) return 0.0;
  double t2 = tau * tau;
  return t2 * (30.0 + tau * (-60.0 + 30.0 * tau));
}

bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

std::string fmt_double(double v) {
  // Shortest representation that round-trips the exact double, so logs and
  // configs can feed replay oracles; "-0" is normalized for stable diffs.
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw HoiError("fmt_double: conversion failed");
  *ptr = '\0';
  if (std::strcmp(buf, "-0") == 0) return "0";
  return buf;
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& columns) {
  open(path, columns);
}

CsvWriter::~CsvWriter() {
  if (file_) std::fclose(static_cast<std::FILE*>(file_));
}

void CsvWriter::open(const std::string& path, const std::vector<std::string>& columns) {
  if (file_) std::fclose(static_cast<std::FILE*>(file_));
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw HoiError("cannot open for writing: " + path);
  file_ = f;
  n_cols_ = columns.size();
  std::string header = join(columns, ",");
  std::fprintf(f, "%s\n", header.c_str());
}

void CsvWriter::write_row(const std::vector<double>& values) {
  std::vector<std::string> cells;
  cells.reserve(values.size());
  for (double v : values) cells.push_back(fmt_double(v));
  write_raw_row(cells);
}

void CsvWriter::write_raw_row(const std::vector<std::string>& cells) {
  if (!file_) throw ContractError("CsvWriter: not open");
  if (cells.size() != n_cols_)
    throw ContractError("CsvWriter: row width " + std::to_string(cells.size()) +
                        " != header width " + std::to_string(n_cols_));
  std::string line = join(cells, ",");
  std::fprintf(static_cast<std::FILE*>(file_), "%s\n", line.c_str());
}

void CsvWriter::flush() {
  if (file_) std::fflush(static_cast<std::FILE*>(file_));
}

int CsvTable::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return static_cast<int>(i);
  return -1;
}

double CsvTable::value(std::size_t row, int col) const {
  if (col < 0 || row >= rows.size() ||
      static_cast<std::size_t>(col) >= rows[row].size())
    throw ContractError("CsvTable: out-of-range access");
  return std::stod(rows[row][col]);
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open CSV: " + path);
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.push_back("");
    if (first) {
      table.columns = cells;
      first = false;
    } else {
      table.rows.push_back(cells);
    }
  }
  return table;
}

}  // namespace hoi
