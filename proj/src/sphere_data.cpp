#include "ntkreg/sphere_data.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>

#include "ntkreg/csv.hpp"
#include "ntkreg/prng.hpp"
#include "ntkreg/version.hpp"

namespace ntkreg {

namespace {

void check_unit_rows(const Matrix& m, double tol, const char* what) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    if (std::abs(norm(m.row(i)) - 1.0) > tol) {
      throw std::invalid_argument(std::string(what) + ": row " + std::to_string(i) +
                                  " is not unit norm");
    }
  }
}

}  // namespace

TargetSpec TargetSpec::abs_linear(double lipschitz, std::vector<double> direction) {
  if (lipschitz <= 0.0) throw std::invalid_argument("target: lipschitz scale must be positive");
  Matrix dirs(1, direction.size());
  dirs.a = std::move(direction);
  check_unit_rows(dirs, 1e-12, "target direction");
  return TargetSpec{TargetKind::AbsLinear, std::move(dirs), lipschitz};
}

TargetSpec TargetSpec::max_of_linears(double lipschitz, Matrix directions) {
  if (lipschitz <= 0.0) throw std::invalid_argument("target: lipschitz scale must be positive");
  if (directions.rows == 0) throw std::invalid_argument("target: needs at least one direction");
  check_unit_rows(directions, 1e-12, "target direction");
  return TargetSpec{TargetKind::MaxOfLinears, std::move(directions), lipschitz};
}

double NoiseSpec::bound() const {
  return kind == NoiseKind::Rademacher ? sigma : sigma * std::sqrt(3.0);
}

Matrix sample_sphere(std::size_t n, std::size_t d, std::uint64_t seed) {
  if (d < 2) throw std::invalid_argument("sample_sphere: dimension must be at least 2");
  Matrix x(n, d);
  Rng rng(seed, "sphere-inputs");
  for (std::size_t i = 0; i < n; ++i) {
    auto row = x.row(i);
    double r = 0.0;
    do {
      for (std::size_t j = 0; j < d; ++j) row[j] = rng.gaussian();
      r = norm(row);
    } while (r == 0.0);
    for (std::size_t j = 0; j < d; ++j) row[j] /= r;
  }
  return x;
}

double eval_target(const TargetSpec& spec, std::span<const double> x) {
  if (x.size() != spec.directions.cols) throw std::invalid_argument("eval_target: dimension mismatch");
  if (std::abs(norm(x) - 1.0) > 1e-9) throw std::invalid_argument("eval_target: input is not unit norm");
  if (spec.kind == TargetKind::AbsLinear) {
    return spec.lipschitz * std::abs(dot(spec.directions.row(0), x));
  }
  double best = 0.0;  // the hinge floor: (v.x)_+ is never below zero
  for (std::size_t j = 0; j < spec.directions.rows; ++j) {
    best = std::max(best, dot(spec.directions.row(j), x));
  }
  return spec.lipschitz * best;
}

std::vector<double> sample_noise(const NoiseSpec& spec, std::size_t n, std::uint64_t seed) {
  if (spec.sigma < 0.0) throw std::invalid_argument("sample_noise: sigma must be nonnegative");
  std::vector<double> out(n, 0.0);
  if (spec.sigma == 0.0) return out;
  Rng rng(seed, "noise");
  if (spec.kind == NoiseKind::Rademacher) {
    for (auto& v : out) v = spec.sigma * rng.rademacher();
  } else {
    double half_width = spec.sigma * std::sqrt(3.0);
    for (auto& v : out) v = half_width * (2.0 * rng.uniform01() - 1.0);
  }
  return out;
}

Dataset generate_dataset(std::size_t n, std::size_t d, const TargetSpec& target,
                         const NoiseSpec& noise, std::uint64_t seed) {
  if (target.directions.cols != d) throw std::invalid_argument("generate_dataset: target dimension mismatch");
  Dataset ds;
  ds.inputs = sample_sphere(n, d, seed);
  ds.clean.resize(n);
  ds.targets.resize(n);
  std::vector<double> xi = sample_noise(noise, n, seed);
  for (std::size_t i = 0; i < n; ++i) {
    ds.clean[i] = eval_target(target, ds.inputs.row(i));
    ds.targets[i] = ds.clean[i] + xi[i];
  }
  ds.b_y = target.lipschitz + noise.bound();
  ds.seed = seed;
  return ds;
}

void write_dataset_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "# ntkreg dataset version=" << kVersion << " seed=" << ds.seed
      << " b_y=" << fmt_g17(ds.b_y) << "\n";
  for (std::size_t j = 0; j < ds.d(); ++j) out << "x_" << j << ",";
  out << "y,clean\n";
  for (std::size_t i = 0; i < ds.n(); ++i) {
    for (std::size_t j = 0; j < ds.d(); ++j) out << fmt_g17(ds.inputs(i, j)) << ",";
    out << fmt_g17(ds.targets[i]) << "," << fmt_g17(ds.clean[i]) << "\n";
  }
  write_text_file(path, out.str());
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  Dataset ds;
  bool have_meta = false;
  std::size_t d = 0;
  std::vector<double> flat;
  std::vector<double> y;
  std::vector<double> clean;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto grab = [&](const std::string& key) -> std::string {
        auto pos = line.find(key + "=");
        if (pos == std::string::npos) return {};
        auto start = pos + key.size() + 1;
        auto end = line.find(' ', start);
        return line.substr(start, end == std::string::npos ? end : end - start);
      };
      std::string seed_str = grab("seed");
      std::string by_str = grab("b_y");
      if (!seed_str.empty() && !by_str.empty()) {
        ds.seed = std::stoull(seed_str);
        ds.b_y = std::stod(by_str);
        have_meta = true;
      }
      continue;
    }
    if (line.rfind("x_0", 0) == 0) {
      d = 0;
      std::istringstream hdr(line);
      std::string field;
      while (std::getline(hdr, field, ',')) {
        if (field.rfind("x_", 0) == 0) ++d;
      }
      continue;
    }
    std::istringstream row(line);
    std::string field;
    std::vector<double> values;
    while (std::getline(row, field, ',')) values.push_back(std::stod(field));
    if (d == 0 || values.size() != d + 2) {
      throw std::runtime_error("dataset csv: malformed row in " + path.string());
    }
    flat.insert(flat.end(), values.begin(), values.begin() + static_cast<std::ptrdiff_t>(d));
    y.push_back(values[d]);
    clean.push_back(values[d + 1]);
  }
  if (d == 0) throw std::runtime_error("dataset csv: missing header in " + path.string());
  ds.inputs = Matrix(y.size(), d);
  ds.inputs.a = std::move(flat);
  ds.targets = std::move(y);
  ds.clean = std::move(clean);
  if (!have_meta) {
    ds.b_y = max_abs(ds.targets);
    ds.seed = 0;
  }
  return ds;
}

}  // namespace ntkreg
