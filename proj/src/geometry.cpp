#include "puttlab/geometry.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <thread>

namespace puttlab::geometry {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

void check_triple(const Waveform& enhanced, const Waveform& clean, const Waveform& noisy,
                  const char* what) {
  signal::check_waveform(enhanced, what);
  signal::check_waveform(clean, what);
  signal::check_waveform(noisy, what);
  if (enhanced.samples.size() != clean.samples.size() ||
      clean.samples.size() != noisy.samples.size()) {
    throw Error(std::string(what) + ": length mismatch");
  }
}

}  // namespace

ArtifactDecomposition decompose(const Waveform& enhanced, const Waveform& clean,
                                const Waveform& noisy) {
  check_triple(enhanced, clean, noisy, "decompose");
  const std::size_t n = clean.samples.size();

  // Unit vector along the clean/noisy line.
  std::vector<double> line(n);
  for (std::size_t i = 0; i < n; ++i) line[i] = clean.samples[i] - noisy.samples[i];
  const double line_norm = norm(line);
  if (line_norm <= line_epsilon(n))
    throw DegenerateLine("clean and noisy coincide; no line direction exists");
  for (double& v : line) v /= line_norm;

  std::vector<double> err_from_noisy(n);
  for (std::size_t i = 0; i < n; ++i)
    err_from_noisy[i] = enhanced.samples[i] - noisy.samples[i];
  const double along = dot(line, err_from_noisy);

  ArtifactDecomposition d;
  d.artifact.resize(n);
  d.proximity.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    d.artifact[i] = err_from_noisy[i] - along * line[i];
    d.proximity[i] = enhanced.samples[i] - d.artifact[i] - clean.samples[i];
  }
  d.artifact_norm = norm(d.artifact);
  d.proximity_norm = norm(d.proximity);
  return d;
}

ProjectionBasis make_basis(const Waveform& enhanced, const Waveform& clean,
                           const Waveform& noisy) {
  ArtifactDecomposition d = decompose(enhanced, clean, noisy);
  if (d.proximity_norm <= kBasisEpsilon)
    throw DegenerateBasis("proximity component vanishes; pick a different reference sample");
  if (d.artifact_norm <= kBasisEpsilon)
    throw DegenerateBasis("artifact component vanishes; pick a different reference sample");

  ProjectionBasis b;
  b.anchor = clean.samples;
  b.sample_rate = clean.sample_rate;
  b.e_parallel = std::move(d.proximity);
  b.e_perp = std::move(d.artifact);
  for (double& v : b.e_parallel) v /= d.proximity_norm;
  for (double& v : b.e_perp) v /= d.artifact_norm;
  return b;
}

PlanePoint project(const Waveform& z, const ProjectionBasis& basis) {
  if (z.samples.size() != basis.anchor.size()) throw Error("project: length mismatch");
  PlanePoint p;
  for (std::size_t i = 0; i < basis.anchor.size(); ++i) {
    const double d = z.samples[i] - basis.anchor[i];
    p.x += d * basis.e_parallel[i];
    p.y += d * basis.e_perp[i];
  }
  return p;
}

Waveform embed(const PlanePoint& p, const ProjectionBasis& basis) {
  if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw Error("embed: non-finite point");
  Waveform z;
  z.sample_rate = basis.sample_rate;
  z.samples.resize(basis.anchor.size());
  for (std::size_t i = 0; i < basis.anchor.size(); ++i)
    z.samples[i] = basis.anchor[i] + p.x * basis.e_parallel[i] + p.y * basis.e_perp[i];
  return z;
}

std::vector<FieldSample> sample_field(const Enhancer& enhancer, const ProjectionBasis& basis,
                                      const GridSpec& grid, int jobs) {
  if (grid.nx < 1 || grid.ny < 1) throw Error("sample_field: empty grid");
  const int total = grid.nx * grid.ny;
  std::vector<FieldSample> out(static_cast<std::size_t>(total));

  auto eval_point = [&](int idx) {
    const int iy = idx / grid.nx;
    const int ix = idx % grid.nx;
    PlanePoint p;
    p.x = grid.nx == 1 ? grid.x_min
                       : grid.x_min + (grid.x_max - grid.x_min) * ix / (grid.nx - 1);
    p.y = grid.ny == 1 ? grid.y_min
                       : grid.y_min + (grid.y_max - grid.y_min) * iy / (grid.ny - 1);
    const Waveform z = embed(p, basis);
    Waveform z_enh;
    try {
      z_enh = enhancer(z);
    } catch (const std::exception& e) {
      char buf[128];
      std::snprintf(buf, sizeof(buf), "enhancer failed at grid point (%.6g, %.6g): ", p.x, p.y);
      throw Error(buf + std::string(e.what()));
    }
    if (z_enh.samples.size() != z.samples.size())
      throw Error("sample_field: enhancer changed the length");
    FieldSample s;
    s.at = p;
    for (std::size_t i = 0; i < z.samples.size(); ++i) {
      const double d = z_enh.samples[i] - z.samples[i];
      s.vector.x += d * basis.e_parallel[i];
      s.vector.y += d * basis.e_perp[i];
    }
    out[static_cast<std::size_t>(idx)] = s;
  };

  if (jobs <= 1) {
    for (int i = 0; i < total; ++i) eval_point(i);
    return out;
  }

  std::vector<std::thread> workers;
  std::exception_ptr first_error;
  std::mutex error_mutex;
  const int n_workers = std::min(jobs, total);
  for (int w = 0; w < n_workers; ++w) {
    workers.emplace_back([&, w] {
      try {
        for (int i = w; i < total; i += n_workers) eval_point(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : workers) t.join();
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

std::vector<PlanePoint> trace_trajectory(const std::vector<Waveform>& stages,
                                         const ProjectionBasis& basis) {
  std::vector<PlanePoint> points;
  points.reserve(stages.size());
  for (const auto& s : stages) points.push_back(project(s, basis));
  return points;
}

void write_field_csv(const std::vector<FieldSample>& field, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoFailure("cannot write " + path);
  out << "x,y,fx,fy\n";
  char line[256];
  for (const auto& s : field) {
    std::snprintf(line, sizeof(line), "%.15g,%.15g,%.15g,%.15g\n", s.at.x, s.at.y, s.vector.x,
                  s.vector.y);
    out << line;
  }
  if (!out) throw IoFailure("short write to " + path);
}

void write_trajectory_csv(const std::vector<PlanePoint>& points, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoFailure("cannot write " + path);
  out << "stage,x,y\n";
  char line[256];
  for (std::size_t i = 0; i < points.size(); ++i) {
    std::snprintf(line, sizeof(line), "%zu,%.15g,%.15g\n", i, points[i].x, points[i].y);
    out << line;
  }
  if (!out) throw IoFailure("short write to " + path);
}

}  // namespace puttlab::geometry
