#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace hoi {

// ---------------------------------------------------------------- errors

// Error taxonomy shared by all modules. The CLI maps these to exit codes:
// config 2, verification 3, numerical 4, everything else 1.
class HoiError : public std::runtime_error {
 public:
  explicit HoiError(const std::string& msg) : std::runtime_error(msg) {}
};

class ConfigError : public HoiError {
 public:
  explicit ConfigError(const std::string& msg) : HoiError(msg) {}
};

class ContractError : public HoiError {
 public:
  explicit ContractError(const std::string& msg) : HoiError(msg) {}
};

class ParseError : public HoiError {
 public:
  explicit ParseError(const std::string& msg) : HoiError(msg) {}
};

class VerificationError : public HoiError {
 public:
  explicit VerificationError(const std::string& msg) : HoiError(msg) {}
};

class GenerationError : public HoiError {
 public:
  explicit GenerationError(const std::string& msg) : HoiError(msg) {}
};

class NumericalFault : public HoiError {
 public:
  explicit NumericalFault(const std::string& msg) : HoiError(msg) {}
};

// ---------------------------------------------------------------- rng

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(const std::string& s);

// Deterministic RNG stream. All randomness in the repo flows through this
// class so that (seed, stream id) fully determines every draw, independent
// of the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Derives an independent stream from a master seed and a stream name,
  // e.g. derive(seed, "env", 12).
  static Rng derive(std::uint64_t master_seed, const std::string& stream,
                    std::uint64_t index = 0);

  std::uint64_t next_u64();
  double uniform();                         // [0, 1)
  double uniform(double lo, double hi);     // [lo, hi)
  double normal();                          // standard normal (Box-Muller)
  double normal(double mean, double std);
  std::uint64_t uniform_int(std::uint64_t n);  // {0, ..., n-1}

 private:
  std::uint64_t s_[4];  // xoshiro256++ state
};

// ---------------------------------------------------------------- small math

constexpr double kPi = 3.14159265358979323846;

// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

// Quintic ease: s(0)=0, s(1)=1, zero velocity and acceleration at both ends.
double min_jerk(double tau);
// d/dt of min_jerk(t/T) evaluated at tau = t/T (returned in 1/T units;
// multiply by 1/T for a time derivative).
double min_jerk_vel(double tau);

bool all_finite(const std::vector<double>& v);

// ---------------------------------------------------------------- formatting

// Canonical number formatting used by every CSV/log writer in the repo,
// chosen to round-trip doubles exactly so logs can feed replay oracles.
std::string fmt_double(double v);

std::string join(const std::vector<std::string>& parts, const std::string& sep);

// ---------------------------------------------------------------- csv

// Minimal CSV writer with a fixed column set; values are written with
// fmt_double so emitted files are byte-stable across identical runs.
class CsvWriter {
 public:
  CsvWriter() = default;
  CsvWriter(const std::string& path, const std::vector<std::string>& columns);
  ~CsvWriter();
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  void open(const std::string& path, const std::vector<std::string>& columns);
  void write_row(const std::vector<double>& values);
  void write_raw_row(const std::vector<std::string>& cells);
  void flush();
  bool is_open() const { return file_ != nullptr; }

 private:
  void* file_ = nullptr;  // FILE*
  std::size_t n_cols_ = 0;
};

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  int column_index(const std::string& name) const;  // -1 when absent
  double value(std::size_t row, int col) const;
};

CsvTable read_csv(const std::string& path);

}  // namespace hoi
