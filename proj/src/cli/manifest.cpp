#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "hardy/cli.hpp"
#include "hardy/params.hpp"

namespace hardy::cli {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (trim(v.substr(used)).empty()) return x;
  } catch (const std::exception&) {
  }
  throw DomainError("manifest key '" + key + "': not a number: " + v);
}

std::vector<double> expand_range(const std::string& key, const std::string& v) {
  std::istringstream in(v);
  std::vector<std::string> parts;
  for (std::string t; in >> t;) parts.push_back(t);
  if (parts.size() != 3) throw DomainError("manifest key '" + key + "' needs start stop step");
  const double a = to_double(key, parts[0]), b = to_double(key, parts[1]), h = to_double(key, parts[2]);
  if (!(h > 0) || b < a) throw DomainError("manifest key '" + key + "': empty or reversed range");
  std::vector<double> out;
  const auto n = static_cast<long>(std::floor((b - a) / h + 1e-9));
  for (long i = 0; i <= n; ++i) out.push_back(a + i * h);
  return out;
}

void assign(Manifest& m, const std::string& key, const std::string& value) {
  if (key == "command") m.command = value;
  else if (key == "N") {
    const double n = to_double(key, value);
    if (n != std::floor(n)) throw DomainError("N must be an integer");
    m.N.push_back(static_cast<int>(n));
  } else if (key == "kappa") m.kappa.push_back(to_double(key, value));
  else if (key == "q") m.q.push_back(to_double(key, value));
  else if (key == "kappa_range") {
    const auto r = expand_range(key, value);
    m.kappa.insert(m.kappa.end(), r.begin(), r.end());
  } else if (key == "q_range") {
    const auto r = expand_range(key, value);
    m.q.insert(m.q.end(), r.begin(), r.end());
  } else if (key == "out") m.out = value;
  else if (key == "seed") {
    try {
      std::size_t used = 0;
      m.seed = std::stoull(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::exception&) {
      throw DomainError("manifest key 'seed': not an unsigned integer: " + value);
    }
  }
  else if (key == "tol") m.tol = to_double(key, value);
  else if (key == "jobs") m.jobs = std::max(1, static_cast<int>(to_double(key, value)));
  else m.options[key] = value;
}

std::string scalar_text(const Json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) return format_double(v.get<double>());
  if (v.is_boolean()) return v.get<bool>() ? "1" : "0";
  throw DomainError("manifest values must be scalars or lists of scalars");
}

}  // namespace

Manifest parse_manifest(const std::string& text) {
  Manifest m;
  const std::string body = trim(text);
  if (!body.empty() && body.front() == '{') {
    Json doc;
    try {
      doc = Json::parse(body);
    } catch (const std::exception& e) {
      throw DomainError(std::string("manifest JSON: ") + e.what());
    }
    for (const auto& [key, v] : doc.items()) {
      if (v.is_array())
        for (const auto& x : v) assign(m, key, scalar_text(x));
      else
        assign(m, key, scalar_text(v));
    }
    return m;
  }
  std::istringstream in(text);
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DomainError("manifest line " + std::to_string(line_no) + ": expected key = value");
    assign(m, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return m;
}

Manifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot read manifest " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return parse_manifest(s.str());
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace hardy::cli
