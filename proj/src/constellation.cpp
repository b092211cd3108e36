#include "physlab/constellation.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "physlab/csv.hpp"

namespace physlab::constellation {

double Constellation::min_distance() const {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    for (Eigen::Index j = i + 1; j < points.rows(); ++j)
      best = std::min(best, (points.row(i) - points.row(j)).norm());
  return best;
}

void Constellation::validate() const {
  if (points.rows() < 2) throw std::invalid_argument("constellation: need at least 2 points");
  if (points.cols() < 1) throw std::invalid_argument("constellation: need dimension >= 1");
  if (!all_finite(points)) throw std::invalid_argument("constellation: non-finite point");
  if (p_av <= 0.0) throw std::invalid_argument("constellation: power budget must be positive");
  if (average_power() > p_av * (1.0 + 1e-9)) {
    std::ostringstream os;
    os << "constellation: average power " << average_power() << " exceeds budget " << p_av;
    throw std::invalid_argument(os.str());
  }
}

PeValue asymptotic_pe(const Constellation& c, double n0) {
  c.validate();
  if (n0 <= 0.0) throw std::invalid_argument("asymptotic_pe: n0 must be positive");
  double dmin = c.min_distance();
  if (dmin == 0.0) return {1.0, true};
  return {std::exp(-dmin * dmin / (8.0 * n0)), false};
}

Mat pe_gradient(const Constellation& c, double n0) {
  c.validate();
  if (n0 <= 0.0) throw std::invalid_argument("pe_gradient: n0 must be positive");
  const Eigen::Index m = c.points.rows();
  Mat grad = Mat::Zero(m, c.points.cols());
  for (Eigen::Index a = 0; a < m; ++a) {
    for (Eigen::Index b = 0; b < m; ++b) {
      if (a == b) continue;
      Eigen::RowVectorXd diff = c.points.row(a) - c.points.row(b);
      double d2 = diff.squaredNorm();
      if (d2 == 0.0)
        throw std::runtime_error("pe_gradient: coincident points " + std::to_string(a) + " and " +
                                 std::to_string(b));
      double w = std::exp(-d2 / (8.0 * n0)) * (1.0 / d2 + 1.0 / (4.0 * n0));
      grad.row(a) -= w * diff / std::sqrt(d2);
    }
  }
  return grad;
}

Constellation gs_step(const Constellation& c, const GsConfig& cfg) {
  double p_av = cfg.p_av > 0.0 ? cfg.p_av : c.p_av;
  Mat stepped = c.points - cfg.step * pe_gradient(c, cfg.n0);
  double total = stepped.squaredNorm();
  if (total <= 0.0) throw std::runtime_error("gs_step: all points collapsed to the origin");
  // Rescale so the power constraint holds with equality.
  double scale = std::sqrt(c.points.rows() * p_av / total);
  return Constellation{stepped * scale, p_av};
}

namespace {

Vec sample_unit_ball(int dim, Rng& rng) {
  while (true) {
    Vec p(dim);
    for (int i = 0; i < dim; ++i) p[i] = rng.uniform(-1.0, 1.0);
    if (p.squaredNorm() <= 1.0) return p;
  }
}

}  // namespace

OptimizeResult optimize(int m_points, int dim, const GsConfig& cfg) {
  if (m_points < 2) throw std::invalid_argument("optimize: need at least 2 points");
  if (dim < 1) throw std::invalid_argument("optimize: need dimension >= 1");
  double p_av = cfg.p_av > 0.0 ? cfg.p_av : 1.0 / m_points;

  OptimizeResult out;
  double best_dmin = -1.0;
  double best_pe = std::numeric_limits<double>::infinity();
  for (int r = 0; r < cfg.restarts; ++r) {
    Rng rng(cfg.seed + static_cast<std::uint64_t>(r));
    Mat init(m_points, dim);
    for (int i = 0; i < m_points; ++i) init.row(i) = sample_unit_ball(dim, rng).transpose();
    double total = init.squaredNorm();
    if (total <= 0.0) continue;
    Constellation cur{init * std::sqrt(m_points * p_av / total), p_av};

    std::vector<double> trace;
    trace.reserve(cfg.max_steps);
    bool failed = false;
    for (int k = 0; k < cfg.max_steps; ++k) {
      try {
        cur = gs_step(cur, cfg);
      } catch (const std::runtime_error&) {
        failed = true;  // degenerate geometry; abandon this restart
        break;
      }
      trace.push_back(cur.min_distance());
    }
    if (failed) continue;

    double dmin = cur.min_distance();
    double pe = asymptotic_pe(cur, cfg.n0).value;
    if (dmin > best_dmin || (dmin == best_dmin && pe < best_pe)) {
      best_dmin = dmin;
      best_pe = pe;
      out.best = cur;
      out.min_distance_trace = std::move(trace);
      out.winning_restart = r;
    }
  }
  if (out.winning_restart < 0) throw std::runtime_error("optimize: every restart degenerated");
  return out;
}

void write_csv(const Constellation& c, const std::filesystem::path& path) {
  std::vector<std::string> header{"m"};
  for (int j = 0; j < c.dim(); ++j) header.push_back("x" + std::to_string(j + 1));
  csv::Table table(header);
  for (int i = 0; i < c.size(); ++i) {
    std::vector<std::string> row{csv::fmt(i + 1)};
    for (int j = 0; j < c.dim(); ++j) row.push_back(csv::fmt(c.points(i, j)));
    table.add_row(std::move(row));
  }
  table.write(path);
}

Constellation read_csv(const std::filesystem::path& path, double p_av) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("read_csv: cannot open " + path.string());
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error("read_csv: empty file");
  std::vector<std::vector<double>> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    bool first = true;
    while (std::getline(ss, cell, ',')) {
      if (first) {
        first = false;
        continue;  // index column
      }
      row.push_back(std::stod(cell));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("read_csv: no data rows");
  Mat points(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) points(i, j) = rows[i][j];
  return Constellation{points, p_av};
}

double hexangle_fraction(const Constellation& c, double tol_deg) {
  if (c.dim() != 2) throw std::invalid_argument("hexangle_fraction: 2-D constellations only");
  int hits = 0, total = 0;
  for (int i = 0; i < c.size(); ++i) {
    // Neighbors within 1.2x of this point's own nearest distance.
    double nearest = std::numeric_limits<double>::infinity();
    for (int j = 0; j < c.size(); ++j)
      if (j != i) nearest = std::min(nearest, (c.points.row(i) - c.points.row(j)).norm());
    std::vector<double> angles;
    for (int j = 0; j < c.size(); ++j) {
      if (j == i) continue;
      Eigen::RowVector2d diff = c.points.row(j) - c.points.row(i);
      if (diff.norm() <= 1.2 * nearest) angles.push_back(std::atan2(diff[1], diff[0]));
    }
    if (angles.size() < 2) continue;
    std::sort(angles.begin(), angles.end());
    for (std::size_t k = 0; k < angles.size(); ++k) {
      double next = (k + 1 < angles.size()) ? angles[k + 1] : angles[0] + 2.0 * M_PI;
      double gap_deg = (next - angles[k]) * 180.0 / M_PI;
      ++total;
      if (std::abs(gap_deg - 60.0) <= tol_deg) ++hits;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(hits) / total;
}

}  // namespace physlab::constellation
