#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace hardy::cli {

using Json = nlohmann::ordered_json;
using Options = std::map<std::string, std::string>;

enum ExitCode { Ok = 0, Failure = 1, ValidationFailure = 2, PartialFailure = 3 };

// Flat "key = value" lines, '#' comments, repeated keys append to lists.
// N, kappa, q are lists; kappa_range / q_range = start stop step expand to lists.
// A document whose first character is '{' is read as JSON with the same keys.
struct Manifest {
  std::string command;
  std::vector<int> N;
  std::vector<double> kappa, q;
  Options options;
  std::string out;
  std::uint64_t seed = 20240611;
  std::optional<double> tol;
  int jobs = 1;
};

Manifest parse_manifest(const std::string& text);
Manifest load_manifest(const std::string& path);

struct Point {
  int N = 2;
  double kappa = 0.25;
  std::optional<double> q;
};

struct Series {
  std::string name, xlabel, ylabel;
  std::vector<double> x, y;
};

struct Table {
  std::string name;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

struct RunOutput {
  Json report;
  bool ok = true;
  std::vector<std::pair<std::string, double>> columns;  // scalar summary for the aggregate CSV
  std::vector<Series> series;
  std::vector<Table> tables;
};

const std::vector<std::string>& commands();
bool needs_power(const std::string& command);

// Throws DomainError for invalid parameters or options.
RunOutput run_point(const std::string& command, const Point& p, const Options& opt, std::uint64_t seed,
                    std::optional<double> tol);

// Validates every grid point, runs them on up to jobs threads, writes the artifact tree.
int run_sweep(const Manifest& m, std::ostream& log);

int main(int argc, char** argv);

// %.17g
std::string format_double(double v);

}  // namespace hardy::cli
