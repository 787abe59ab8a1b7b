#include "jamfield/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <thread>

#include "jamfield/plots.hpp"
#include "jamfield/rng.hpp"

namespace jamfield {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt_num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// Everything one realization contributes to the sweep.
struct RealizationOutcome {
  std::vector<std::vector<Position>> estimates;  // [inr][estimator]
  std::vector<std::vector<char>> converged;
  std::vector<std::vector<double>> ms;
  std::vector<std::vector<double>> crb_variance;  // [inr], empty if degenerate
};

std::vector<double> crb_variance(const Dataset& data, const JammerParams& jp) {
  const auto xs = data.positions();
  try {
    if (jp.theta.dim() == 2) return crb_2d(xs, jp, data.sigma).variance;
    return crb_from_fim(fim_pathloss(xs, jp, data.sigma)).variance;
  } catch (const DegenerateGeometry&) {
    return {};
  }
}

unsigned resolve_workers(unsigned requested, std::size_t tasks) {
  unsigned w = requested != 0 ? requested : std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(std::min<std::size_t>(w, std::max<std::size_t>(tasks, 1)));
}

// Runs fn(i) for i in [0, n) on a small pool. Results must be written to
// per-index slots so the outcome does not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

std::vector<std::vector<double>> reduce_crb(const std::vector<std::vector<std::vector<double>>>& per_real,
                                            std::size_t n_inr, std::size_t dim) {
  std::vector<std::vector<double>> table(n_inr, std::vector<double>(dim, kNaN));
  for (std::size_t i = 0; i < n_inr; ++i) {
    std::vector<double> sum(dim, 0.0);
    std::size_t count = 0;
    for (const auto& r : per_real) {
      if (r[i].empty()) continue;
      for (std::size_t d = 0; d < dim; ++d) sum[d] += r[i][d];
      ++count;
    }
    if (count == 0) continue;
    for (std::size_t d = 0; d < dim; ++d) table[i][d] = std::sqrt(sum[d] / static_cast<double>(count));
  }
  return table;
}

}  // namespace

void ExperimentConfig::validate() const {
  scenario.validate();
  if (inr_grid_db.empty()) throw std::invalid_argument("inr_grid_db must not be empty");
  for (double v : inr_grid_db) {
    if (!std::isfinite(v)) throw std::invalid_argument("inr_grid_db entries must be finite");
  }
  if (n_mc == 0) throw std::invalid_argument("n_mc must be > 0");
  for (const auto& e : estimators) e.validate();
}

std::uint64_t realization_seed(std::uint64_t master_seed, std::size_t index) {
  return derive_seed(master_seed, streams::kRealization, index);
}

std::vector<double> rmse_per_dimension(std::span<const Position> estimates, const Position& truth) {
  if (estimates.empty()) throw std::invalid_argument("rmse of an empty estimate set");
  std::vector<double> acc(truth.dim(), 0.0);
  for (const auto& e : estimates) {
    if (e.dim() != truth.dim()) throw DimensionMismatch("estimate and truth differ in dimension");
    for (std::size_t d = 0; d < truth.dim(); ++d) {
      const double r = e[d] - truth[d];
      acc[d] += r * r;
    }
  }
  for (double& a : acc) a = std::sqrt(a / static_cast<double>(estimates.size()));
  return acc;
}

std::vector<std::vector<double>> crb_table(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::size_t n_inr = cfg.inr_grid_db.size();
  const FieldModel field(cfg.scenario);
  std::vector<std::vector<std::vector<double>>> per_real(cfg.n_mc);
  parallel_for(cfg.n_mc, resolve_workers(cfg.workers, cfg.n_mc), [&](std::size_t r) {
    ScenarioConfig sc = cfg.scenario;
    sc.rng_seed = realization_seed(cfg.master_seed, r);
    const auto candidates = sample_candidates(sc, field);
    per_real[r].resize(n_inr);
    for (std::size_t i = 0; i < n_inr; ++i) {
      const double sigma = sigma_from_inr(sc.jammer.p0_dbw, cfg.inr_grid_db[i]);
      per_real[r][i] = crb_variance(select_observations(candidates, sigma, sc.top_k), sc.jammer);
    }
  });
  return reduce_crb(per_real, n_inr, cfg.scenario.jammer.theta.dim());
}

SweepResult run_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.estimators.empty()) throw std::invalid_argument("sweep needs at least one estimator");
  const std::size_t n_inr = cfg.inr_grid_db.size();
  const std::size_t n_est = cfg.estimators.size();
  const std::size_t dim = cfg.scenario.jammer.theta.dim();
  const KnownPhysics known{cfg.scenario.jammer.p0_dbw, cfg.scenario.jammer.gamma};
  const FieldModel field(cfg.scenario);

  std::vector<RealizationOutcome> outcomes(cfg.n_mc);
  parallel_for(cfg.n_mc, resolve_workers(cfg.workers, cfg.n_mc), [&](std::size_t r) {
    ScenarioConfig sc = cfg.scenario;
    const std::uint64_t rseed = realization_seed(cfg.master_seed, r);
    sc.rng_seed = rseed;
    const auto candidates = sample_candidates(sc, field);

    RealizationOutcome& out = outcomes[r];
    out.estimates.resize(n_inr);
    out.converged.resize(n_inr);
    out.ms.resize(n_inr);
    out.crb_variance.resize(n_inr);
    for (std::size_t i = 0; i < n_inr; ++i) {
      const double sigma = sigma_from_inr(sc.jammer.p0_dbw, cfg.inr_grid_db[i]);
      const Dataset data = select_observations(candidates, sigma, sc.top_k);
      out.crb_variance[i] = crb_variance(data, sc.jammer);
      for (std::size_t e = 0; e < n_est; ++e) {
        EstimatorSpec spec = cfg.estimators[e];
        spec.seed = derive_seed(rseed ^ SplitMix64::mix(cfg.estimators[e].seed), streams::kEstimator, e);
        const auto t0 = std::chrono::steady_clock::now();
        try {
          const EstimateReport rep = run_estimator(data, spec, known, sc.d_far);
          out.estimates[i].push_back(rep.theta_hat);
          out.converged[i].push_back(rep.converged ? 1 : 0);
          out.ms[i].push_back(rep.wall_time_s * 1e3);
        } catch (const std::exception&) {
          // A failed fit counts against the convergence rate and falls back
          // to the strongest observer, so it still contributes to the RMSE.
          out.estimates[i].push_back(data.observations.front().x);
          out.converged[i].push_back(0);
          out.ms[i].push_back(
              std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
        }
      }
    }
  });

  SweepResult res;
  res.inr_grid_db = cfg.inr_grid_db;
  res.dim = dim;
  res.n_mc = cfg.n_mc;
  res.truth = cfg.scenario.jammer.theta;
  for (const auto& e : cfg.estimators) res.estimators.push_back(e.label());
  res.estimates.assign(n_est, std::vector<std::vector<Position>>(n_inr));

  for (std::size_t e = 0; e < n_est; ++e) {
    for (std::size_t i = 0; i < n_inr; ++i) {
      SweepCell cell;
      cell.estimator = res.estimators[e];
      cell.inr_db = cfg.inr_grid_db[i];
      std::size_t n_conv = 0;
      double ms = 0.0;
      auto& est = res.estimates[e][i];
      for (const auto& o : outcomes) {
        est.push_back(o.estimates[i][e]);
        n_conv += static_cast<std::size_t>(o.converged[i][e]);
        ms += o.ms[i][e];
      }
      cell.n_finite = est.size();
      cell.rmse = rmse_per_dimension(est, res.truth);
      cell.converged_frac = static_cast<double>(n_conv) / static_cast<double>(cfg.n_mc);
      cell.mean_ms = cfg.record_timing ? ms / static_cast<double>(cfg.n_mc) : kNaN;
      res.cells.push_back(std::move(cell));
    }
  }

  std::vector<std::vector<std::vector<double>>> crb_per_real;
  crb_per_real.reserve(outcomes.size());
  for (auto& o : outcomes) crb_per_real.push_back(std::move(o.crb_variance));
  res.crb_rmse = reduce_crb(crb_per_real, n_inr, dim);
  return res;
}

void write_results_csv(const SweepResult& result, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << "estimator,inr_db,dim,rmse_m,crb_rmse_m,converged_frac,mean_ms\n";
  for (std::size_t e = 0; e < result.estimators.size(); ++e) {
    for (std::size_t i = 0; i < result.inr_grid_db.size(); ++i) {
      const auto& c = result.cell(e, i);
      for (std::size_t d = 0; d < result.dim; ++d) {
        out << c.estimator << ',' << fmt_num(c.inr_db) << ',' << d << ',' << fmt_num(c.rmse[d]) << ','
            << fmt_num(result.crb_rmse[i][d]) << ',' << fmt_num(c.converged_frac) << ','
            << fmt_num(c.mean_ms) << '\n';
      }
    }
  }
}

void emit_outputs(const SweepResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_results_csv(result, dir / "results.csv");

  auto make_plot = [&](std::optional<std::size_t> axis) {
    LinePlot plot;
    plot.x_label = "INR [dB]";
    plot.log_y = true;
    if (axis) {
      plot.title = "RMSE, axis " + std::to_string(*axis);
      plot.y_label = "RMSE [m]";
    } else {
      plot.title = "Position RMSE";
      plot.y_label = "RMSE [m]";
    }
    auto pick = [&](const std::vector<double>& v) {
      if (axis) return v[*axis];
      double s = 0.0;
      for (double x : v) s += x * x;
      return std::sqrt(s);
    };
    for (std::size_t e = 0; e < result.estimators.size(); ++e) {
      PlotSeries s{result.estimators[e], result.inr_grid_db, {}, false};
      for (std::size_t i = 0; i < result.inr_grid_db.size(); ++i) s.y.push_back(pick(result.cell(e, i).rmse));
      plot.series.push_back(std::move(s));
    }
    PlotSeries crb{"CRB", result.inr_grid_db, {}, true};
    for (const auto& row : result.crb_rmse) crb.y.push_back(pick(row));
    plot.series.push_back(std::move(crb));
    plot.caption = "CRB: sqrt of the bound averaged over " + std::to_string(result.n_mc) +
                   " realizations of the selected observers";
    return plot;
  };
  write_line_plot_svg(make_plot(std::nullopt), dir / "rmse_vs_inr.svg");
  for (std::size_t d = 0; d < result.dim; ++d) {
    write_line_plot_svg(make_plot(d), dir / ("rmse_vs_inr_axis" + std::to_string(d) + ".svg"));
  }

  std::ofstream note(dir / "crb_note.txt");
  note << "crb_rmse_m is the square root of the per-axis Cramer-Rao variance bound averaged over\n"
          "the "
       << result.n_mc
       << " Monte Carlo realizations. Each realization draws its own observers and keeps the\n"
          "strongest measurements, so the bound is conditional on that observer set. The bound\n"
          "assumes the pathloss model with known P0 and gamma, even for ray-traced data.\n";
}

void emit_field(const ExperimentConfig& cfg, const std::filesystem::path& dir, int grid) {
  cfg.validate();
  const auto& sc = cfg.scenario;
  if (sc.jammer.theta.dim() != 2) throw DimensionMismatch("field output needs a 2-D scenario");
  if (grid < 2) throw std::invalid_argument("field grid must be >= 2");
  std::filesystem::create_directories(dir);

  const FieldModel field(sc);
  FieldRaster raster;
  raster.x0 = sc.area.min[0];
  raster.x1 = sc.area.max[0];
  raster.y0 = sc.area.min[1];
  raster.y1 = sc.area.max[1];
  raster.nx = raster.ny = grid;
  raster.values.assign(static_cast<std::size_t>(grid) * grid, kNaN);

  const bool urban = sc.regime == Regime::raytrace;
  auto cell_center = [&](int k, double lo, double hi) { return lo + (hi - lo) * (k + 0.5) / grid; };
  parallel_for(static_cast<std::size_t>(grid), resolve_workers(cfg.workers, grid), [&](std::size_t iy) {
    const double y = cell_center(static_cast<int>(iy), raster.y0, raster.y1);
    for (int ix = 0; ix < grid; ++ix) {
      const double x = cell_center(ix, raster.x0, raster.x1);
      if (urban && sc.buildings.inside_any({x, y})) continue;
      raster.values[iy * grid + ix] = field.rss(Position{x, y});
    }
  });

  std::ofstream csv(dir / "field.csv", std::ios::binary);
  csv << "x_m,y_m,rss_dbw\n";
  for (int iy = 0; iy < grid; ++iy) {
    for (int ix = 0; ix < grid; ++ix) {
      csv << fmt_num(cell_center(ix, raster.x0, raster.x1)) << ','
          << fmt_num(cell_center(iy, raster.y0, raster.y1)) << ','
          << fmt_num(raster.values[static_cast<std::size_t>(iy) * grid + ix]) << '\n';
    }
  }

  ScenarioConfig first = sc;
  first.rng_seed = realization_seed(cfg.master_seed, 0);
  const Dataset data = select_observations(sample_candidates(first, field),
                                           sigma_from_inr(sc.jammer.p0_dbw, sc.inr_db), sc.top_k);
  FieldOverlay overlay;
  overlay.buildings = urban ? &sc.buildings : nullptr;
  overlay.jammer = {sc.jammer.theta[0], sc.jammer.theta[1]};
  for (const auto& o : data.observations) overlay.observers.push_back({o.x[0], o.x[1]});
  write_field_svg(raster, overlay, dir / "field.svg");
}

}  // namespace jamfield
