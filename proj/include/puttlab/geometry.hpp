#pragma once

#include <functional>
#include <string>
#include <vector>

#include "puttlab/waveform.hpp"

namespace puttlab::geometry {

using signal::Waveform;

// Split of the enhancement error (enhanced - clean) into a component
// perpendicular to the clean/noisy line (the artifact) and the remainder
// along it (the proximity). artifact + proximity == enhanced - clean.
struct ArtifactDecomposition {
  std::vector<double> artifact;
  std::vector<double> proximity;
  double artifact_norm = 0.0;
  double proximity_norm = 0.0;
};

struct PlanePoint {
  double x = 0.0;  // proximity coordinate
  double y = 0.0;  // artifact coordinate
};

// Orthonormal 2-D frame anchored at the clean signal: e_parallel spans the
// proximity direction, e_perp the artifact direction of a reference
// enhancement.
struct ProjectionBasis {
  std::vector<double> anchor;
  std::vector<double> e_parallel;
  std::vector<double> e_perp;
  int sample_rate = 16000;
};

struct FieldSample {
  PlanePoint at;
  PlanePoint vector;
};

struct GridSpec {
  double x_min = 0.0, x_max = 1.0;
  double y_min = 0.0, y_max = 1.0;
  int nx = 21, ny = 21;
};

// Below this, the clean/noisy line direction is undefined and decompose
// refuses to divide by the near-zero norm. Absolute threshold on |S - X|.
inline double line_epsilon(std::size_t length) {
  return 1e-12 * std::sqrt(static_cast<double>(length));
}
constexpr double kBasisEpsilon = 1e-12;

ArtifactDecomposition decompose(const Waveform& enhanced, const Waveform& clean,
                                const Waveform& noisy);

ProjectionBasis make_basis(const Waveform& enhanced, const Waveform& clean,
                           const Waveform& noisy);

PlanePoint project(const Waveform& z, const ProjectionBasis& basis);

Waveform embed(const PlanePoint& p, const ProjectionBasis& basis);

using Enhancer = std::function<Waveform(const Waveform&)>;

// Samples the displacement field p -> projection(enhancer(embed(p)) - embed(p))
// over the grid, row-major in y then x. `jobs` > 1 evaluates grid points
// concurrently; the enhancer must then be safe for concurrent invocation.
std::vector<FieldSample> sample_field(const Enhancer& enhancer, const ProjectionBasis& basis,
                                      const GridSpec& grid, int jobs = 1);

std::vector<PlanePoint> trace_trajectory(const std::vector<Waveform>& stages,
                                         const ProjectionBasis& basis);

// CSV export per the interface spec: "x,y,fx,fy" / "stage,x,y".
void write_field_csv(const std::vector<FieldSample>& field, const std::string& path);
void write_trajectory_csv(const std::vector<PlanePoint>& points, const std::string& path);

}  // namespace puttlab::geometry
