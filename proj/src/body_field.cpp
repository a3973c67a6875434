#include "ktopo/body_field.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "ktopo/errors.hpp"
#include "ktopo/simd/kernels.hpp"
#include "ktopo/text_io.hpp"

namespace ktopo {

std::vector<double> one_ring_support_radii(const SurfaceMesh& body) {
  const int n = body.vertex_count();
  std::vector<std::set<int>> ring(n);
  for (const Face& f : body.faces()) {
    for (int k = 0; k < 3; ++k) {
      ring[f[k]].insert(f[(k + 1) % 3]);
      ring[f[k]].insert(f[(k + 2) % 3]);
    }
  }
  std::vector<double> h(n, 0.0);
  const auto& v = body.vertices();
  for (int i = 0; i < n; ++i) {
    if (ring[i].empty()) continue;
    double sum = 0.0;
    for (int j : ring[i]) sum += (v[j] - v[i]).norm();
    h[i] = 2.0 * sum / static_cast<double>(ring[i].size());
  }
  return h;
}

ImlsField build_field(const SurfaceMesh& body) {
  ImlsField f;
  f.radius_ = one_ring_support_radii(body);
  const int n = body.vertex_count();
  if (n == 0) throw TopologyError("IMLS field needs a non-empty body mesh");
  for (int i = 0; i < n; ++i) {
    if (!(f.radius_[i] > 0.0)) {
      throw TopologyError("body vertex " + std::to_string(i) + " has an empty one-ring");
    }
  }
  const auto& v = body.vertices();
  Vec3 lo = v[0], hi = v[0];
  for (const Vec3& p : v) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  f.cell_ = *std::max_element(f.radius_.begin(), f.radius_.end());
  f.origin_ = lo.array() - f.cell_;
  for (int a = 0; a < 3; ++a) {
    f.dims_[a] = static_cast<int>(std::floor((hi[a] + f.cell_ - f.origin_[a]) / f.cell_)) + 1;
  }
  auto cell_index = [&](const Vec3& p) {
    const int ix = static_cast<int>(std::floor((p.x() - f.origin_.x()) / f.cell_));
    const int iy = static_cast<int>(std::floor((p.y() - f.origin_.y()) / f.cell_));
    const int iz = static_cast<int>(std::floor((p.z() - f.origin_.z()) / f.cell_));
    return (iz * f.dims_[1] + iy) * f.dims_[0] + ix;
  };
  std::vector<int> cell_of(n);
  for (int i = 0; i < n; ++i) cell_of[i] = cell_index(v[i]);
  f.order_.resize(n);
  std::iota(f.order_.begin(), f.order_.end(), 0);
  std::stable_sort(f.order_.begin(), f.order_.end(),
                   [&](int a, int b) { return cell_of[a] < cell_of[b]; });
  const std::size_t ncells =
      static_cast<std::size_t>(f.dims_[0]) * f.dims_[1] * static_cast<std::size_t>(f.dims_[2]);
  f.cell_start_.assign(ncells + 1, 0);
  for (int i = 0; i < n; ++i) ++f.cell_start_[cell_of[i] + 1];
  std::partial_sum(f.cell_start_.begin(), f.cell_start_.end(), f.cell_start_.begin());

  f.slot_.resize(n);
  for (auto* arr : {&f.px_, &f.py_, &f.pz_, &f.nx_, &f.ny_, &f.nz_, &f.inv_h2_}) arr->resize(n);
  const auto& nrm = body.normals();
  for (int s = 0; s < n; ++s) {
    const int i = f.order_[s];
    f.slot_[i] = s;
    f.px_[s] = v[i].x();
    f.py_[s] = v[i].y();
    f.pz_[s] = v[i].z();
    f.nx_[s] = nrm[i].x();
    f.ny_[s] = nrm[i].y();
    f.nz_[s] = nrm[i].z();
    f.inv_h2_[s] = 1.0 / (f.radius_[i] * f.radius_[i]);
  }
  return f;
}

Vec3 ImlsField::source_position(int i) const {
  const int s = slot_[i];
  return {px_[s], py_[s], pz_[s]};
}

Vec3 ImlsField::source_normal(int i) const {
  const int s = slot_[i];
  return {nx_[s], ny_[s], nz_[s]};
}

ImlsField::Sample ImlsField::eval(const Vec3& x) const {
  Sample out;
  if (!x.allFinite()) return out;
  const double fx = (x.x() - origin_.x()) / cell_;
  const double fy = (x.y() - origin_.y()) / cell_;
  const double fz = (x.z() - origin_.z()) / cell_;
  // Outside the padded grid nothing is within reach.
  if (fx < -1.0 || fy < -1.0 || fz < -1.0 || fx > dims_[0] + 1.0 || fy > dims_[1] + 1.0 ||
      fz > dims_[2] + 1.0) {
    return out;
  }
  const int cx = static_cast<int>(std::floor(fx));
  const int cy = static_cast<int>(std::floor(fy));
  const int cz = static_cast<int>(std::floor(fz));
  const int x0 = std::max(cx - 1, 0);
  const int x1 = std::min(cx + 1, dims_[0] - 1);
  if (x0 > x1) return out;

  simd::ImlsSums sums;
  const double q[3] = {x.x(), x.y(), x.z()};
  for (int iz = std::max(cz - 1, 0); iz <= std::min(cz + 1, dims_[2] - 1); ++iz) {
    for (int iy = std::max(cy - 1, 0); iy <= std::min(cy + 1, dims_[1] - 1); ++iy) {
      const int row = (iz * dims_[1] + iy) * dims_[0];
      const int begin = cell_start_[row + x0];
      const int end = cell_start_[row + x1 + 1];
      if (end <= begin) continue;
      const simd::ImlsBlock block{px_.data() + begin, py_.data() + begin, pz_.data() + begin,
                                  nx_.data() + begin, ny_.data() + begin, nz_.data() + begin,
                                  inv_h2_.data() + begin, static_cast<std::size_t>(end - begin)};
      simd::imls_accumulate(block, q, sums);
    }
  }
  if (sums.support == 0 || !(sums.w > 0.0)) return out;
  out.supported = true;
  out.support = sums.support;
  out.value = sums.w_dist / sums.w;
  for (int a = 0; a < 3; ++a) {
    out.gradient[a] = (sums.w_n[a] + sums.dist_dw[a] - out.value * sums.dw[a]) / sums.w;
  }
  return out;
}

PenaltyResult body_penalty(const ImlsField& field, const Dofs& positions) {
  const int n = static_cast<int>(positions.size() / 3);
  PenaltyResult r;
  r.gradient = Dofs::Zero(positions.size());
  std::vector<double> terms(n, 0.0);
  std::vector<double> values(n, 0.0);
  std::vector<std::uint8_t> supported(n, 0);
  r.phi.assign(n, std::numeric_limits<double>::quiet_NaN());
  r.contact_grad.assign(n, Vec3::Zero());
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    const auto s = field.eval(positions.segment<3>(3 * i));
    if (!s.supported) continue;
    supported[i] = 1;
    values[i] = s.value;
    r.phi[i] = s.value;
    r.contact_grad[i] = s.gradient;
    if (s.value <= 0.0) {
      terms[i] = s.value * s.value;
      r.gradient.segment<3>(3 * i) = 2.0 * s.value * s.gradient;
    }
  }
  r.min_phi = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    r.energy += terms[i];
    if (!supported[i]) {
      ++r.unsupported;
      continue;
    }
    if (values[i] < 0.0) ++r.penetrating;
    r.min_phi = std::min(r.min_phi, values[i]);
  }
  if (r.unsupported == n) r.min_phi = 0.0;
  return r;
}

void dump_phi_csv(const ImlsField& field, const Vec3& lo, const Vec3& hi, int n,
                  const std::filesystem::path& path) {
  if (n < 2) throw ConfigError("dump_phi_csv: need at least 2 samples per axis");
  std::ostringstream out;
  out << "x,y,z,phi\n";
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        const Vec3 t(i / double(n - 1), j / double(n - 1), k / double(n - 1));
        const Vec3 x = lo.array() + t.array() * (hi - lo).array();
        const auto s = field.eval(x);
        if (!s.supported) continue;
        out << format_double(x.x()) << ',' << format_double(x.y()) << ',' << format_double(x.z())
            << ',' << format_double(s.value) << '\n';
      }
    }
  }
  write_text_file(path, out.str());
}

}  // namespace ktopo
