#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "lmforge/errors.hpp"
#include "lmforge/evalgen.hpp"

namespace lmforge::evalgen {

ProjectionMethod parse_projection_method(std::string_view name) {
  if (name == "pca") return ProjectionMethod::pca;
  if (name == "tsne") return ProjectionMethod::tsne;
  throw UsageError("unknown projection method '" + std::string(name) + "' (allowed: pca, tsne)");
}

namespace {

void check_input(const Matrix& x) {
  if (x.rows < 3) throw DegenerateInputError("project: need at least 3 points, got " + std::to_string(x.rows));
  if (x.cols < 2) throw DegenerateInputError("project: need at least 2 dimensions, got " + std::to_string(x.cols));
  if (x.data.size() != x.rows * x.cols) throw DimensionError("project: matrix storage does not match its shape");
  for (double v : x.data)
    if (!std::isfinite(v)) throw NumericalError("project: non-finite input coordinate");
  for (std::size_t r = 1; r < x.rows; ++r)
    if (!std::equal(x.data.begin(), x.data.begin() + static_cast<std::ptrdiff_t>(x.cols),
                    x.data.begin() + static_cast<std::ptrdiff_t>(r * x.cols)))
      return;
  throw DegenerateInputError("project: all input points are identical");
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void normalize(std::vector<double>& v) {
  const double n = std::sqrt(dot(v, v));
  if (n > 0.0)
    for (double& x : v) x /= n;
}

// Dominant eigenvector of the symmetric matrix c, kept orthogonal to `against`.
std::vector<double> power_iteration(const std::vector<double>& c, std::size_t d,
                                    const std::vector<std::vector<double>>& against, Rng& rng) {
  std::vector<double> v(d);
  for (double& x : v) x = rng.normal();
  auto orthogonalize = [&](std::vector<double>& u) {
    for (const auto& a : against) {
      const double p = dot(u, a);
      for (std::size_t i = 0; i < d; ++i) u[i] -= p * a[i];
    }
  };
  orthogonalize(v);
  normalize(v);
  for (int iter = 0; iter < 100000; ++iter) {
    std::vector<double> w(d, 0.0);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) w[i] += c[i * d + j] * v[j];
    orthogonalize(w);
    if (dot(w, w) == 0.0) return v;  // remaining spectrum is zero
    normalize(w);
    double delta = 0.0;
    for (std::size_t i = 0; i < d; ++i) delta = std::max(delta, std::abs(w[i] - v[i]));
    v = std::move(w);
    if (delta < 1e-9) break;
  }
  orthogonalize(v);
  normalize(v);
  return v;
}

}  // namespace

Matrix pca_2d(const Matrix& x) {
  check_input(x);
  const std::size_t n = x.rows, d = x.cols;
  std::vector<double> mean(d, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < d; ++j) mean[j] += x.at(r, j);
  for (double& m : mean) m /= static_cast<double>(n);
  Matrix centred = x;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < d; ++j) centred.at(r, j) -= mean[j];
  std::vector<double> cov(d * d, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) cov[i * d + j] += centred.at(r, i) * centred.at(r, j);
  Rng rng(0x706361);
  std::vector<std::vector<double>> dirs;
  for (int k = 0; k < 2; ++k) {
    auto v = power_iteration(cov, d, dirs, rng);
    // Deflate so the next pass finds the following direction.
    std::vector<double> cv(d, 0.0);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) cv[i] += cov[i * d + j] * v[j];
    const double lambda = dot(v, cv);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) cov[i * d + j] -= lambda * v[i] * v[j];
    dirs.push_back(std::move(v));
  }
  Matrix out{n, 2, std::vector<double>(n * 2)};
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t k = 0; k < 2; ++k)
      out.at(r, k) = dot(std::span<const double>(centred.data).subspan(r * d, d), dirs[k]);
  return out;
}

namespace {

std::vector<double> squared_distances(const Matrix& x) {
  const std::size_t n = x.rows;
  std::vector<double> d2(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < x.cols; ++k) {
        const double diff = x.at(i, k) - x.at(j, k);
        s += diff * diff;
      }
      d2[i * n + j] = d2[j * n + i] = s;
    }
  return d2;
}

}  // namespace

Matrix tsne_conditional_affinities(const Matrix& x, double perplexity) {
  check_input(x);
  const std::size_t n = x.rows;
  if (!(perplexity > 0.0) || perplexity >= static_cast<double>(n - 1))
    throw ContractError("tsne: perplexity " + std::to_string(perplexity) + " must lie in (0, N - 1) for N = " +
                        std::to_string(n));
  const auto d2 = squared_distances(x);
  const double target = std::log(perplexity);
  Matrix p{n, n, std::vector<double>(n * n, 0.0)};
  std::vector<double> row(n);
  for (std::size_t i = 0; i < n; ++i) {
    // Bisection on the precision beta = 1 / (2 sigma^2).
    double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
    double min_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) min_d = std::min(min_d, d2[i * n + j]);
    for (int iter = 0; iter < 200; ++iter) {
      double sum = 0.0, weighted = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        // Shift by the nearest distance so the largest term is exp(0).
        row[j] = j == i ? 0.0 : std::exp(-beta * (d2[i * n + j] - min_d));
        sum += row[j];
        weighted += row[j] * (d2[i * n + j] - min_d);
      }
      const double entropy = std::log(sum) + beta * weighted / sum;
      for (std::size_t j = 0; j < n; ++j) p.at(i, j) = row[j] / sum;
      const double diff = entropy - target;
      if (std::abs(diff) < 1e-5) break;
      if (diff > 0.0) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
      } else {
        hi = beta;
        beta = 0.5 * (beta + lo);
      }
    }
  }
  return p;
}

Projection tsne_2d(const Matrix& x, const ProjectionConfig& cfg) {
  const Matrix cond = tsne_conditional_affinities(x, cfg.perplexity);
  const std::size_t n = x.rows;
  std::vector<double> p(n * n);
  const double norm = 2.0 * static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      p[i * n + j] = std::max((cond.at(i, j) + cond.at(j, i)) / norm, 1e-12);
  for (std::size_t i = 0; i < n; ++i) p[i * n + i] = 0.0;

  Rng rng(cfg.seed);
  std::vector<double> y(n * 2), velocity(n * 2, 0.0), gains(n * 2, 1.0), grad(n * 2);
  for (double& v : y) v = 1e-4 * rng.normal();
  std::vector<double> num(n * n);

  auto compute_q = [&] {
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) {
          num[i * n + j] = 0.0;
          continue;
        }
        const double dx = y[2 * i] - y[2 * j], dy = y[2 * i + 1] - y[2 * j + 1];
        num[i * n + j] = 1.0 / (1.0 + dx * dx + dy * dy);
        z += num[i * n + j];
      }
    return z;
  };
  auto kl = [&](double z) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const double q = std::max(num[i * n + j] / z, 1e-300);
        s += p[i * n + j] * std::log(p[i * n + j] / q);
      }
    return s;
  };

  Projection out;
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const double z = compute_q();
    if (it % 50 == 0) {
      const double k = kl(z);
      if (!std::isfinite(k)) throw NumericalError("tsne: KL divergence became non-finite at iteration " + std::to_string(it));
      out.kl_trace.emplace_back(it, k);
    }
    const double exag = it < cfg.exaggeration_iterations ? cfg.exaggeration : 1.0;
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const double w = 4.0 * (exag * p[i * n + j] - num[i * n + j] / z) * num[i * n + j];
        grad[2 * i] += w * (y[2 * i] - y[2 * j]);
        grad[2 * i + 1] += w * (y[2 * i + 1] - y[2 * j + 1]);
      }
    for (std::size_t k = 0; k < y.size(); ++k) {
      // Adaptive gains: grow when the gradient sign opposes the velocity.
      gains[k] = (grad[k] > 0.0) != (velocity[k] > 0.0) ? gains[k] + 0.2 : std::max(gains[k] * 0.8, 0.01);
      velocity[k] = cfg.momentum * velocity[k] - cfg.learning_rate * gains[k] * grad[k];
      y[k] += velocity[k];
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mx += y[2 * i];
      my += y[2 * i + 1];
    }
    for (std::size_t i = 0; i < n; ++i) {
      y[2 * i] -= mx / static_cast<double>(n);
      y[2 * i + 1] -= my / static_cast<double>(n);
    }
  }
  const double final_kl = kl(compute_q());
  if (!std::isfinite(final_kl)) throw NumericalError("tsne: final KL divergence is non-finite");
  out.kl_trace.emplace_back(cfg.iterations, final_kl);
  for (double v : y)
    if (!std::isfinite(v)) throw NumericalError("tsne: non-finite output coordinate");
  out.coords = Matrix{n, 2, std::move(y)};
  return out;
}

Projection project_2d(const Matrix& x, const ProjectionConfig& cfg) {
  if (cfg.method == ProjectionMethod::pca) {
    Projection out;
    out.coords = pca_2d(x);
    return out;
  }
  return tsne_2d(x, cfg);
}

void write_projection_csv(const std::filesystem::path& path, const Matrix& coords) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "index,x,y\n" << std::setprecision(17);
  for (std::size_t r = 0; r < coords.rows; ++r) out << r << ',' << coords.at(r, 0) << ',' << coords.at(r, 1) << '\n';
}

std::string projection_svg(const Matrix& coords) {
  constexpr double kSize = 600.0, kPad = 20.0;
  double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
  for (std::size_t r = 0; r < coords.rows; ++r) {
    const double x = coords.at(r, 0), y = coords.at(r, 1);
    if (r == 0 || x < xmin) xmin = x;
    if (r == 0 || x > xmax) xmax = x;
    if (r == 0 || y < ymin) ymin = y;
    if (r == 0 || y > ymax) ymax = y;
  }
  const double sx = xmax > xmin ? (kSize - 2 * kPad) / (xmax - xmin) : 1.0;
  const double sy = ymax > ymin ? (kSize - 2 * kPad) / (ymax - ymin) : 1.0;
  std::ostringstream svg;
  svg << std::fixed << std::setprecision(2);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize << "\" height=\"" << kSize
      << "\" viewBox=\"0 0 " << kSize << ' ' << kSize << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t r = 0; r < coords.rows; ++r) {
    const double px = kPad + (coords.at(r, 0) - xmin) * sx;
    const double py = kSize - kPad - (coords.at(r, 1) - ymin) * sy;
    svg << "<circle cx=\"" << px << "\" cy=\"" << py << "\" r=\"2\" fill=\"#1f5fa8\" fill-opacity=\"0.6\"/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace lmforge::evalgen
