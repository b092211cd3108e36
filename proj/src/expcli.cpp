#include "physlab/expcli.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <functional>
#include <sstream>

#include <json.hpp>

#include "physlab/chanest.hpp"
#include "physlab/constellation.hpp"
#include "physlab/csv.hpp"
#include "physlab/endtoend.hpp"
#include "physlab/infoflow.hpp"
#include "physlab/neural.hpp"
#include "physlab/ntk.hpp"
#include "physlab/numkit.hpp"
#include "physlab/sha256.hpp"

namespace physlab::expcli {

Tier tier_from_name(const std::string& name) {
  if (name == "smoke") return Tier::smoke;
  if (name == "desk") return Tier::desk;
  if (name == "full") return Tier::full;
  throw ConfigError("unknown tier '" + name + "' (expected smoke, desk or full)");
}

const char* tier_name(Tier tier) {
  switch (tier) {
    case Tier::smoke:
      return "smoke";
    case Tier::desk:
      return "desk";
    case Tier::full:
      return "full";
  }
  return "?";
}

namespace {

enum class Kind { integer, real, text, int_list, real_list };

struct ParamSpec {
  std::string key;
  Kind kind = Kind::integer;
  // Defaults per tier, as written in a config file.
  std::string smoke;
  std::string desk;
  std::string full;
  double lo = -1e300;
  double hi = 1e300;
  bool power_of_two = false;
  bool not_one = false;  // alpha != 1
};

struct RunContext;

struct Preset {
  std::string name;
  std::string description;
  std::vector<ParamSpec> params;
  std::function<void(RunContext&)> body;
  // Rough single-core runtime model in seconds, for validate().
  std::function<double(const RunContext&)> estimate;
};

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    if (cell.empty()) continue;
    out.push_back(std::stoi(cell));
  }
  if (out.empty()) throw ConfigError("empty integer list");
  return out;
}

std::vector<double> parse_real_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    if (cell.empty()) continue;
    out.push_back(std::stod(cell));
  }
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

struct RunContext {
  const Preset* preset = nullptr;
  Tier tier = Tier::smoke;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> resolved;
  std::filesystem::path out_dir;
  std::vector<std::string> outputs;  // file names, in emission order
  bool dry_run = false;

  const std::string& raw(const std::string& key) const {
    auto it = resolved.find(key);
    if (it == resolved.end())
      throw ConfigError("preset '" + preset->name + "' has no parameter '" + key + "'");
    return it->second;
  }
  int geti(const std::string& key) const { return std::stoi(raw(key)); }
  std::int64_t geti64(const std::string& key) const { return std::stoll(raw(key)); }
  double getd(const std::string& key) const { return std::stod(raw(key)); }
  std::vector<int> getil(const std::string& key) const { return parse_int_list(raw(key)); }
  std::vector<double> getdl(const std::string& key) const { return parse_real_list(raw(key)); }

  /// Component-addressed generator: preset -> component -> config seed.
  Rng rng(const std::string& component) const {
    return Rng(mix_seed(mix_seed(seed, preset->name), component));
  }

  std::filesystem::path out(const std::string& name) {
    outputs.push_back(name);
    return out_dir / name;
  }
};

double budget_seconds(Tier tier) {
  switch (tier) {
    case Tier::smoke:
      return 600.0;
    case Tier::desk:
      return 7200.0;
    case Tier::full:
      return 1e9;
  }
  return 600.0;
}

// ---------------------------------------------------------------------------
// Shared building blocks

endtoend::AeSystem trained_ae(RunContext& ctx, const std::string& component, int m, int d,
                              double snr_db, endtoend::ChannelKind kind, int epochs, double eta,
                              endtoend::TrainTrace* trace_out, int record_every) {
  Rng rng = ctx.rng(component);
  Rng init_rng = rng.derive("init");
  endtoend::AeSystem sys = endtoend::make_default_system(m, d, snr_db, kind, init_rng);
  Rng train_rng = rng.derive("train");
  endtoend::TrainTrace trace = endtoend::train(sys, epochs, eta, train_rng, record_every);
  if (trace.diverged && kind == endtoend::ChannelKind::awgn)
    throw DivergenceError("preset " + ctx.preset->name + ": training diverged at epoch " +
                          std::to_string(trace.diverged_epoch));
  if (trace_out) *trace_out = trace;
  return sys;
}

// Cost constants, calibrated on the smoke tier of this machine.
constexpr double kFlopsPerSecond = 2.0e9;

double ae_epoch_flops(int m, int d) {
  double enc = static_cast<double>(m) * m + static_cast<double>(m) * d;
  double dec = static_cast<double>(d) * m + static_cast<double>(m) * m;
  return 6.0 * m * (enc + dec);  // forward + backward + update over a batch of m
}

double nn_train_flops(int io, int width, int hidden, int epochs, int n) {
  double per_sample = static_cast<double>(io) * width * 2 +
                      static_cast<double>(width) * width * std::max(0, hidden - 1);
  return 6.0 * per_sample * epochs * n;
}

// ---------------------------------------------------------------------------
// Preset registry

std::vector<Preset> build_presets() {
  std::vector<Preset> presets;

  auto tier_param = [] {
    return ParamSpec{"tier", Kind::text, "smoke", "smoke", "smoke"};
  };

  // ---- fig4_fro_awgn ------------------------------------------------------
  {
    Preset p;
    p.name = "fig4_fro_awgn";
    p.description =
        "Per-layer Frobenius norms of an AWGN autoencoder link versus epochs at low and high "
        "SNR (Fig. 4)";
    p.params = {tier_param(),
                {"m", Kind::integer, "8", "8", "8", 2, 4096, true},
                {"d", Kind::integer, "2", "2", "2", 1, 64},
                {"snr_db", Kind::real_list, "0,25", "0,25", "0,25", -10, 40},
                {"epochs", Kind::integer, "2000", "40000", "1000000", 1, 2000000000},
                {"eta", Kind::real, "0.02", "0.02", "0.02", 1e-9, 10},
                {"record_every", Kind::integer, "10", "100", "2500", 1, 1000000}};
    p.body = [](RunContext& ctx) {
      int m = ctx.geti("m"), d = ctx.geti("d");
      int epochs = ctx.geti("epochs");
      double eta = ctx.getd("eta");
      for (double snr : ctx.getdl("snr_db")) {
        endtoend::TrainTrace trace;
        trained_ae(ctx, "snr/" + csv::fmt(snr), m, d, snr, endtoend::ChannelKind::awgn, epochs,
                   eta, &trace, ctx.geti("record_every"));
        std::ostringstream name;
        name << "fro_awgn_snr" << snr << ".csv";
        endtoend::write_trace_csv(trace, ctx.out(name.str()));
      }
    };
    p.estimate = [](const RunContext& ctx) {
      return ctx.getdl("snr_db").size() *
             ae_epoch_flops(ctx.geti("m"), ctx.geti("d")) * ctx.geti("epochs") / kFlopsPerSecond;
    };
    presets.push_back(std::move(p));
  }

  // ---- fig5_constellations ------------------------------------------------
  {
    Preset p;
    p.name = "fig5_constellations";
    p.description =
        "Gradient-search and autoencoder constellations for d=2, M in {8,16} under AWGN "
        "(Fig. 5)";
    p.params = {tier_param(),
                {"m_list", Kind::int_list, "8,16", "8,16", "8,16", 2, 4096, true},
                {"d", Kind::integer, "2", "2", "2", 1, 64},
                {"gs_steps", Kind::integer, "1000", "1000", "1000", 1, 100000000},
                {"gs_restarts", Kind::integer, "10", "50", "50", 1, 100000},
                {"gs_step_size", Kind::real, "2e-4", "2e-4", "2e-4", 1e-12, 1.0},
                {"gs_n0", Kind::real, "0.01", "0.01", "0.01", 1e-9, 100},
                {"snr_db", Kind::real, "25", "25", "25", -10, 40},
                {"ae_epochs", Kind::integer, "5000", "100000", "1000000", 1, 2000000000},
                {"ae_eta", Kind::real, "0.05", "0.05", "0.05", 1e-9, 10}};
    p.body = [](RunContext& ctx) {
      int d = ctx.geti("d");
      for (int m : ctx.getil("m_list")) {
        constellation::GsConfig cfg;
        cfg.n0 = ctx.getd("gs_n0");
        cfg.step = ctx.getd("gs_step_size");
        cfg.max_steps = ctx.geti("gs_steps");
        cfg.restarts = ctx.geti("gs_restarts");
        cfg.seed = ctx.rng("gs/m" + std::to_string(m)).seed();
        constellation::OptimizeResult gs = constellation::optimize(m, d, cfg);
        constellation::write_csv(gs.best,
                                 ctx.out("gs_constellation_m" + std::to_string(m) + ".csv"));

        endtoend::AeSystem sys =
            trained_ae(ctx, "ae/m" + std::to_string(m), m, d, ctx.getd("snr_db"),
                       endtoend::ChannelKind::awgn, ctx.geti("ae_epochs"), ctx.getd("ae_eta"),
                       nullptr, std::max(1, ctx.geti("ae_epochs") / 100));
        constellation::write_csv(endtoend::extract_constellation(sys),
                                 ctx.out("ae_constellation_m" + std::to_string(m) + ".csv"));
      }
    };
    p.estimate = [](const RunContext& ctx) {
      double total = 0.0;
      for (int m : ctx.getil("m_list")) {
        total += ctx.geti("gs_steps") * static_cast<double>(ctx.geti("gs_restarts")) * m * m *
                 ctx.geti("d") * 8.0 / kFlopsPerSecond;
        total += ae_epoch_flops(m, ctx.geti("d")) * ctx.geti("ae_epochs") / kFlopsPerSecond;
      }
      return total;
    };
    presets.push_back(std::move(p));
  }

  // ---- fig6_constellations_3d ---------------------------------------------
  {
    Preset p;
    p.name = "fig6_constellations_3d";
    p.description =
        "Gradient-search and autoencoder constellations for d=3, M=16 under AWGN (Fig. 6)";
    p.params = {tier_param(),
                {"m", Kind::integer, "16", "16", "16", 2, 4096, true},
                {"d", Kind::integer, "3", "3", "3", 1, 64},
                {"gs_steps", Kind::integer, "3000", "3000", "3000", 1, 100000000},
                {"gs_restarts", Kind::integer, "10", "50", "50", 1, 100000},
                {"gs_step_size", Kind::real, "2e-4", "2e-4", "2e-4", 1e-12, 1.0},
                {"gs_n0", Kind::real, "0.01", "0.01", "0.01", 1e-9, 100},
                {"snr_db", Kind::real, "25", "25", "25", -10, 40},
                {"ae_epochs", Kind::integer, "5000", "100000", "1000000", 1, 2000000000},
                {"ae_eta", Kind::real, "0.05", "0.05", "0.05", 1e-9, 10}};
    p.body = [](RunContext& ctx) {
      int m = ctx.geti("m"), d = ctx.geti("d");
      constellation::GsConfig cfg;
      cfg.n0 = ctx.getd("gs_n0");
      cfg.step = ctx.getd("gs_step_size");
      cfg.max_steps = ctx.geti("gs_steps");
      cfg.restarts = ctx.geti("gs_restarts");
      cfg.seed = ctx.rng("gs").seed();
      constellation::OptimizeResult gs = constellation::optimize(m, d, cfg);
      constellation::write_csv(gs.best, ctx.out("gs_constellation_3d.csv"));

      endtoend::AeSystem sys = trained_ae(ctx, "ae", m, d, ctx.getd("snr_db"),
                                          endtoend::ChannelKind::awgn, ctx.geti("ae_epochs"),
                                          ctx.getd("ae_eta"), nullptr,
                                          std::max(1, ctx.geti("ae_epochs") / 100));
      constellation::write_csv(endtoend::extract_constellation(sys),
                               ctx.out("ae_constellation_3d.csv"));
    };
    p.estimate = [](const RunContext& ctx) {
      int m = ctx.geti("m");
      return ctx.geti("gs_steps") * static_cast<double>(ctx.geti("gs_restarts")) * m * m *
                 ctx.geti("d") * 8.0 / kFlopsPerSecond +
             ae_epoch_flops(m, ctx.geti("d")) * ctx.geti("ae_epochs") / kFlopsPerSecond;
    };
    presets.push_back(std::move(p));
  }

  // ---- fig7_rayleigh_ae -----------------------------------------------------
  {
    Preset p;
    p.name = "fig7_rayleigh_ae";
    p.description =
        "Autoencoder under Rayleigh flat fading at 25 dB: Frobenius-norm trace, constellation "
        "and weight drift against a matched AWGN run (Fig. 7)";
    p.params = {tier_param(),
                {"m", Kind::integer, "8", "8", "8", 2, 4096, true},
                {"d", Kind::integer, "2", "2", "2", 1, 64},
                {"snr_db", Kind::real, "25", "25", "25", -10, 40},
                {"epochs", Kind::integer, "2000", "40000", "1000000", 1, 2000000000},
                {"eta", Kind::real, "0.02", "0.02", "0.02", 1e-9, 10},
                {"record_every", Kind::integer, "10", "100", "2500", 1, 1000000}};
    p.body = [](RunContext& ctx) {
      int m = ctx.geti("m"), d = ctx.geti("d");
      endtoend::TrainTrace trace;
      endtoend::AeSystem sys =
          trained_ae(ctx, "ae", m, d, ctx.getd("snr_db"), endtoend::ChannelKind::rayleigh_flat,
                     ctx.geti("epochs"), ctx.getd("eta"), &trace, ctx.geti("record_every"));
      endtoend::write_trace_csv(trace, ctx.out("fro_rayleigh.csv"));
      constellation::write_csv(endtoend::extract_constellation(sys),
                               ctx.out("ae_constellation_rayleigh.csv"));

      Rng drift_init = ctx.rng("drift/init");
      endtoend::AeSystem fresh = endtoend::make_default_system(
          m, d, ctx.getd("snr_db"), endtoend::ChannelKind::rayleigh_flat, drift_init);
      Rng drift_rng = ctx.rng("drift/train");
      ntk::DriftPair drift = ntk::fading_drift(fresh, ctx.geti("epochs"), ctx.getd("eta"),
                                               drift_rng, ctx.geti("record_every"));
      ntk::write_drift_csv(drift, ctx.out("weight_drift.csv"));
    };
    p.estimate = [](const RunContext& ctx) {
      return 3.0 * ae_epoch_flops(ctx.geti("m"), ctx.geti("d")) * ctx.geti("epochs") /
             kFlopsPerSecond;
    };
    presets.push_back(std::move(p));
  }

  // ---- fig7m_mse_samples ----------------------------------------------------
  {
    Preset p;
    p.name = "fig7m_mse_samples";
    p.description =
        "MSE of LS, LMMSE and a single-hidden-layer estimator versus SNR for several training "
        "set sizes (the MSE-versus-SNR training-set figure)";
    p.params = {tier_param(),
                {"n_c", Kind::integer, "64", "64", "64", 2, 4096},
                {"snr_db", Kind::real_list, "0,10,20", "0,5,10,15,20,25", "0,5,10,15,20,25",
                 -10, 40},
                {"n_train", Kind::int_list, "100,1000", "100,1000,10000", "100,1000,10000", 1,
                 100000000},
                {"n_test", Kind::integer, "2000", "20000", "100000", 1, 100000000},
                {"epochs", Kind::integer, "150", "300", "300", 1, 2000000000},
                {"eta", Kind::real, "0.001", "0.001", "0.001", 1e-9, 10},
                {"batch", Kind::integer, "100", "100", "100", 1, 1000000},
                {"width", Kind::integer, "128", "128", "128", 1, 65536},
                {"pilot_spacing", Kind::integer, "4", "4", "4", 1, 4096}};
    p.body = [](RunContext& ctx) {
      const int n_c = ctx.geti("n_c");
      chanest::OfdmChannelModel model = chanest::OfdmChannelModel::exponential(n_c);
      std::vector<chanest::SweepRow> rows;
      for (double snr : ctx.getdl("snr_db")) {
        double noise_var = chanest::noise_var_for_snr(snr);
        rows.push_back({"ls", snr, 0, 0, 0, chanest::ls_analytic_mse(model, noise_var), 0, 0});
        rows.push_back(
            {"lmmse", snr, 0, 0, 0, chanest::lmmse_analytic_mse(model, noise_var), 0, 0});
        for (int n_train : ctx.getil("n_train")) {
          Rng rng = ctx.rng("snr/" + csv::fmt(snr) + "/n/" + std::to_string(n_train));
          Rng data_rng = rng.derive("data");
          chanest::EstimationDataset train = chanest::build_dataset(
              model, n_train, snr, ctx.geti("pilot_spacing"), data_rng);
          chanest::EstimationDataset test = chanest::build_dataset(
              model, ctx.geti("n_test"), snr, ctx.geti("pilot_spacing"), data_rng);
          chanest::NnConfig cfg;
          cfg.hidden_layers = 1;
          cfg.width = ctx.geti("width");
          cfg.epochs = ctx.geti("epochs");
          cfg.eta = ctx.getd("eta");
          cfg.batch = ctx.geti("batch");
          Rng net_rng = rng.derive("net");
          chanest::NnTrainResult trained = chanest::train_nn_estimator(train, cfg, net_rng);
          if (trained.diverged)
            throw DivergenceError("fig7m_mse_samples: estimator diverged at epoch " +
                                  std::to_string(trained.diverged_epoch));
          rows.push_back({"nn", snr, n_train, 1, cfg.width,
                          chanest::evaluate_mse(trained.net, test), ctx.geti("n_test"),
                          net_rng.seed()});
        }
      }
      chanest::write_sweep_csv(rows, ctx.out("mse_samples.csv"));
    };
    p.estimate = [](const RunContext& ctx) {
      double total = 0.0;
      int io = 2 * ctx.geti("n_c");
      for (int n_train : ctx.getil("n_train"))
        total += nn_train_flops(io, ctx.geti("width"), 1, ctx.geti("epochs"), n_train);
      return ctx.getdl("snr_db").size() * (total + 4.0e8) / kFlopsPerSecond;
    };
    presets.push_back(std::move(p));
  }

  // ---- fig8_depth -----------------------------------------------------------
  {
    Preset p;
    p.name = "fig8_depth";
    p.description =
        "Test MSE of neural estimators with increasing hidden-layer count versus SNR "
        "(Fig. 8 depth ordering)";
    p.params = {tier_param(),
                {"n_c", Kind::integer, "64", "64", "64", 2, 4096},
                {"snr_db", Kind::real_list, "10", "0,5,10,15,20,25", "0,5,10,15,20,25", -10,
                 40},
                {"depths", Kind::int_list, "1,3", "1,3,5", "1,3,5", 1, 64},
                {"trials", Kind::integer, "2", "10", "10", 1, 10000},
                {"n_train", Kind::integer, "100", "100", "100", 1, 100000000},
                {"n_test", Kind::integer, "2000", "5000", "100000", 1, 100000000},
                {"epochs", Kind::integer, "150", "300", "300", 1, 2000000000},
                {"eta", Kind::real, "0.001", "0.001", "0.001", 1e-9, 10},
                {"batch", Kind::integer, "100", "100", "100", 1, 1000000},
                {"width", Kind::integer, "128", "128", "128", 1, 65536}};
    p.body = [](RunContext& ctx) {
      chanest::OfdmChannelModel model =
          chanest::OfdmChannelModel::exponential(ctx.geti("n_c"));
      chanest::NnConfig cfg;
      cfg.width = ctx.geti("width");
      cfg.epochs = ctx.geti("epochs");
      cfg.eta = ctx.getd("eta");
      cfg.batch = ctx.geti("batch");
      std::vector<chanest::SweepRow> rows;
      std::vector<int> depths = ctx.getil("depths");
      for (double snr : ctx.getdl("snr_db")) {
        double noise_var = chanest::noise_var_for_snr(snr);
        rows.push_back({"ls", snr, 0, 0, 0, chanest::ls_analytic_mse(model, noise_var), 0, 0});
        rows.push_back(
            {"lmmse", snr, 0, 0, 0, chanest::lmmse_analytic_mse(model, noise_var), 0, 0});
        Rng rng = ctx.rng("snr/" + csv::fmt(snr));
        chanest::DepthSweepResult sweep =
            chanest::depth_sweep(model, ctx.geti("n_train"), depths, ctx.geti("trials"), snr,
                                 cfg, ctx.geti("n_test"), rng);
        for (std::size_t di = 0; di < depths.size(); ++di)
          rows.push_back({"nn", snr, ctx.geti("n_train"), depths[di], cfg.width,
                          sweep.mean_mse[di], ctx.geti("n_test"), rng.seed()});
      }
      chanest::write_sweep_csv(rows, ctx.out("depth_sweep.csv"));
    };
    p.estimate = [](const RunContext& ctx) {
      double per_snr = 0.0;
      int io = 2 * ctx.geti("n_c");
      for (int depth : ctx.getil("depths"))
        per_snr += ctx.geti("trials") *
                   nn_train_flops(io, ctx.geti("width"), depth, ctx.geti("epochs"),
                                  ctx.geti("n_train"));
      return ctx.getdl("snr_db").size() * (per_snr + 2.0e8) / kFlopsPerSecond;
    };
    presets.push_back(std::move(p));
  }

  // ---- fig_entropy_vs_n -------------------------------------------------------
  {
    Preset p;
    p.name = "fig_entropy_vs_n";
    p.description =
        "Conditional Renyi entropy of the true channel given its interpolated LS estimate "
        "versus sample count (the S_alpha(z | z_LS) figure)";
    p.params = {tier_param(),
                {"n_c", Kind::int_list, "64", "64,128", "64,128", 2, 4096},
                {"snr_db", Kind::real_list, "10", "5,10,20", "5,10,20", -10, 40},
                {"n_list", Kind::int_list, "100,500", "100,500,1000,5000", "100,500,1000,5000",
                 2, 1000000},
                {"alpha", Kind::real, "1.01", "1.01", "1.01", 1e-6, 100, false, true},
                {"kernel_width", Kind::real, "-1", "-1", "-1", -1e300, 1e300},
                {"seeds", Kind::integer, "1", "3", "5", 1, 10000}};
    p.body = [](RunContext& ctx) {
      csv::Table table({"n", "n_c", "snr_db", "alpha", "cond_entropy_bits", "kernel_width_v",
                        "kernel_width_z", "seed"});
      double alpha = ctx.getd("alpha");
      double width = ctx.getd("kernel_width");
      for (int n_c : ctx.getil("n_c")) {
        chanest::OfdmChannelModel model = chanest::OfdmChannelModel::exponential(n_c);
        for (double snr : ctx.getdl("snr_db")) {
          for (int seed_idx = 0; seed_idx < ctx.geti("seeds"); ++seed_idx) {
            for (int n : ctx.getil("n_list")) {
              Rng rng = ctx.rng("nc/" + std::to_string(n_c) + "/snr/" + csv::fmt(snr) +
                                "/seed/" + std::to_string(seed_idx) + "/n/" + std::to_string(n));
              chanest::EstimationDataset data = chanest::build_dataset(model, n, snr, 4, rng);
              infoflow::GramMatrix gv = infoflow::gram(data.v_real().transpose(), width);
              infoflow::GramMatrix gz = infoflow::gram(data.z_real().transpose(), width);
              double cond = infoflow::conditional_entropy(gz, gv, alpha);
              table.add_row({csv::fmt(n), csv::fmt(n_c), csv::fmt(snr), csv::fmt(alpha),
                             csv::fmt(cond), csv::fmt(gv.kernel_width),
                             csv::fmt(gz.kernel_width), csv::fmt(rng.seed())});
            }
          }
        }
      }
      table.write(ctx.out("entropy_vs_n.csv"));
    };
    p.estimate = [](const RunContext& ctx) {
      double total = 0.0;
      for (int n : ctx.getil("n_list")) total += 3.0 * std::pow(static_cast<double>(n), 3);
      return ctx.getil("n_c").size() * ctx.getdl("snr_db").size() * ctx.geti("seeds") * total /
             kFlopsPerSecond;
    };
    presets.push_back(std::move(p));
  }

  // ---- fig9_ip_deep / fig10_ip_slfn --------------------------------------------
  auto ip_preset = [&](const std::string& name, const std::string& description,
                       const std::string& hidden_desc) {
    Preset p;
    p.name = name;
    p.description = description;
    p.params = {tier_param(),
                {"n_c", Kind::integer, "64", "64", "64", 2, 4096},
                {"hidden", Kind::int_list, hidden_desc, hidden_desc, hidden_desc, 1, 65536},
                {"snr_db", Kind::real, "10", "10", "10", -10, 40},
                {"n_train", Kind::integer, "1000", "1000", "1000", 2, 100000000},
                {"iterations", Kind::integer, "200", "200", "200", 1, 100000000},
                {"eta", Kind::real, "0.001", "0.001", "0.001", 1e-9, 10},
                {"batch", Kind::integer, "100", "100", "100", 1, 1000000},
                {"alpha", Kind::real, "1.01", "1.01", "1.01", 1e-6, 100, false, true},
                {"kernel_width", Kind::real, "-1", "-1", "-1", -1e300, 1e300},
                {"gram_samples", Kind::integer, "100", "200", "200", 2, 100000},
                {"pilot_spacing", Kind::integer, "4", "4", "4", 1, 4096}};
    p.body = [](RunContext& ctx) {
      const int n_c = ctx.geti("n_c");
      chanest::OfdmChannelModel model = chanest::OfdmChannelModel::exponential(n_c);
      Rng data_rng = ctx.rng("data");
      chanest::EstimationDataset data = chanest::build_dataset(
          model, ctx.geti("n_train"), ctx.getd("snr_db"), ctx.geti("pilot_spacing"), data_rng);

      const int io = 2 * n_c;
      std::vector<int> widths{io};
      std::vector<neural::Activation> acts;
      for (int w : ctx.getil("hidden")) {
        widths.push_back(w);
        acts.push_back(neural::Activation::make(neural::Act::linear));
      }
      widths.push_back(io);
      acts.push_back(neural::Activation::make(neural::Act::linear));
      Rng net_rng = ctx.rng("net");
      neural::Network net = neural::init(widths, acts, net_rng);

      infoflow::PlaneConfig cfg;
      cfg.eta = ctx.getd("eta");
      cfg.batch = ctx.geti("batch");
      cfg.iterations = ctx.geti("iterations");
      cfg.alpha = ctx.getd("alpha");
      cfg.kernel_width = ctx.getd("kernel_width");
      cfg.gram_samples = ctx.geti("gram_samples");
      Rng run_rng = ctx.rng("train");
      infoflow::InfoPlaneTrace trace = infoflow::record_planes(net, data, cfg, run_rng);
      infoflow::write_planes_csv(trace, ctx.out("information_planes.csv"));
    };
    p.estimate = [](const RunContext& ctx) {
      std::vector<int> hidden = ctx.getil("hidden");
      int io = 2 * ctx.geti("n_c");
      double train = nn_train_flops(io, hidden.front(), static_cast<int>(hidden.size()),
                                    1, ctx.geti("batch")) *
                     ctx.geti("iterations");
      double grams = 20.0 * (hidden.size() + 2) * 3.0 *
                     std::pow(static_cast<double>(ctx.geti("gram_samples")), 3);
      return (train + grams) / kFlopsPerSecond;
    };
    return p;
  };
  presets.push_back(ip_preset(
      "fig9_ip_deep",
      "Information planes of the deep 128-64-32-16-8-16-32-64-128 channel estimator (Fig. 9)",
      "64,32,16,8,16,32,64"));
  presets.push_back(ip_preset(
      "fig10_ip_slfn",
      "Information planes of the single-hidden-layer 128-128-128 channel estimator (Fig. 10)",
      "128"));

  // ---- ntk_width_sweep ---------------------------------------------------------
  {
    Preset p;
    p.name = "ntk_width_sweep";
    p.description =
        "Spectral distance between iteration-0 gradient Grams and their analytic wide-network "
        "limits across widths (NTK concentration diagnostic)";
    p.params = {tier_param(),
                {"input_dim", Kind::integer, "16", "16", "16", 1, 65536},
                {"n_inputs", Kind::integer, "8", "8", "8", 2, 4096},
                {"depth", Kind::integer, "2", "2", "2", 1, 64},
                {"widths", Kind::int_list, "50,200", "50,200,800", "50,200,800", 1, 1000000},
                {"seeds", Kind::integer, "3", "10", "10", 1, 10000},
                {"activation", Kind::text, "relu", "relu", "relu"}};
    p.body = [](RunContext& ctx) {
      Rng rng = ctx.rng("inputs");
      Mat inputs = rng.normal_mat(ctx.geti("input_dim"), ctx.geti("n_inputs"));
      neural::Act act = neural::Activation::from_name(ctx.raw("activation")).tag;
      ntk::WidthSweepResult result =
          ntk::width_sweep(inputs, ctx.geti("depth"), ctx.getil("widths"), ctx.geti("seeds"),
                           act, ctx.rng("nets").seed());
      ntk::write_sweep_csv(result, ctx.out("ntk_width_sweep.csv"));
    };
    p.estimate = [](const RunContext& ctx) {
      double total = 0.0;
      for (int w : ctx.getil("widths"))
        total += ctx.geti("seeds") * ctx.geti("n_inputs") *
                 (static_cast<double>(w) * w * ctx.geti("depth") * 6.0 +
                  static_cast<double>(ctx.geti("n_inputs")) * w * w);
      return (total + 1e8) / kFlopsPerSecond;
    };
    presets.push_back(std::move(p));
  }

  return presets;
}

const std::vector<Preset>& registry() {
  static const std::vector<Preset> presets = build_presets();
  return presets;
}

const Preset& find_preset(const std::string& name) {
  for (const Preset& p : registry())
    if (p.name == name) return p;
  std::string known;
  for (const Preset& p : registry()) known += (known.empty() ? "" : ", ") + p.name;
  throw ConfigError("unknown preset '" + name + "'; run `physlab list` (known: " + known + ")");
}

const ParamSpec* find_param(const Preset& preset, const std::string& key) {
  for (const ParamSpec& spec : preset.params)
    if (spec.key == key) return &spec;
  return nullptr;
}

bool is_power_of_two(long v) { return v > 0 && (v & (v - 1)) == 0; }

void check_value(const ParamSpec& spec, const std::string& value,
                 std::vector<Violation>& violations) {
  try {
    switch (spec.kind) {
      case Kind::text:
        if (spec.key == "tier") tier_from_name(value);
        break;
      case Kind::integer: {
        double v = std::stod(value);
        if (v < spec.lo || v > spec.hi)
          violations.push_back({spec.key, spec.key + " = " + value + " outside [" +
                                              csv::fmt(spec.lo) + ", " + csv::fmt(spec.hi) +
                                              "]"});
        if (spec.power_of_two && !is_power_of_two(std::lround(v)))
          violations.push_back(
              {spec.key, spec.key + " = " + value + " must be a power of 2 (one-hot alphabet)"});
        break;
      }
      case Kind::real: {
        double v = std::stod(value);
        if (v < spec.lo || v > spec.hi)
          violations.push_back({spec.key, spec.key + " = " + value + " outside [" +
                                              csv::fmt(spec.lo) + ", " + csv::fmt(spec.hi) +
                                              "]"});
        if (spec.not_one && v == 1.0)
          violations.push_back(
              {spec.key, spec.key + " = 1 is excluded; the Renyi order must differ from 1"});
        break;
      }
      case Kind::int_list: {
        for (int v : parse_int_list(value)) {
          if (v < spec.lo || v > spec.hi)
            violations.push_back({spec.key, spec.key + " entry " + std::to_string(v) +
                                                " outside [" + csv::fmt(spec.lo) + ", " +
                                                csv::fmt(spec.hi) + "]"});
          if (spec.power_of_two && !is_power_of_two(v))
            violations.push_back({spec.key, spec.key + " entry " + std::to_string(v) +
                                                " must be a power of 2 (one-hot alphabet)"});
        }
        break;
      }
      case Kind::real_list: {
        for (double v : parse_real_list(value))
          if (v < spec.lo || v > spec.hi)
            violations.push_back({spec.key, spec.key + " entry " + csv::fmt(v) + " outside [" +
                                                csv::fmt(spec.lo) + ", " + csv::fmt(spec.hi) +
                                                "]"});
        break;
      }
    }
  } catch (const std::exception&) {
    violations.push_back({spec.key, spec.key + " = '" + value + "' cannot be parsed"});
  }
}

RunContext resolve(const Preset& preset, const ExperimentConfig& config,
                   std::vector<Violation>* violations) {
  RunContext ctx;
  ctx.preset = &preset;
  ctx.seed = config.seed;
  ctx.out_dir = config.out_dir;

  for (const auto& [key, value] : config.overrides) {
    if (!find_param(preset, key)) {
      if (violations)
        violations->push_back(
            {key, "preset " + preset.name + " does not accept override '" + key + "'"});
      else
        throw ConfigError("preset " + preset.name + " does not accept override '" + key + "'");
    }
  }

  std::string tier_text = "smoke";
  auto tier_it = config.overrides.find("tier");
  if (tier_it != config.overrides.end()) tier_text = tier_it->second;
  try {
    ctx.tier = tier_from_name(tier_text);
  } catch (const ConfigError&) {
    if (!violations) throw;
    violations->push_back({"tier", "unknown tier '" + tier_text + "'"});
    ctx.tier = Tier::smoke;
  }

  for (const ParamSpec& spec : preset.params) {
    std::string value;
    auto it = config.overrides.find(spec.key);
    if (it != config.overrides.end()) {
      value = it->second;
    } else {
      switch (ctx.tier) {
        case Tier::smoke:
          value = spec.smoke;
          break;
        case Tier::desk:
          value = spec.desk;
          break;
        case Tier::full:
          value = spec.full;
          break;
      }
    }
    if (violations) check_value(spec, value, *violations);
    ctx.resolved[spec.key] = value;
  }
  ctx.resolved["tier"] = tier_name(ctx.tier);
  return ctx;
}

std::string iso_now() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::vector<PresetInfo> list_presets() {
  std::vector<PresetInfo> out;
  for (const Preset& p : registry()) {
    PresetInfo info;
    info.name = p.name;
    info.description = p.description;
    for (const ParamSpec& spec : p.params) info.keys.push_back(spec.key);
    out.push_back(std::move(info));
  }
  return out;
}

std::vector<Violation> validate(const ExperimentConfig& config) {
  const Preset& preset = find_preset(config.preset);
  std::vector<Violation> violations;
  RunContext ctx = resolve(preset, config, &violations);
  if (violations.empty() && preset.estimate) {
    double seconds = preset.estimate(ctx);
    double budget = budget_seconds(ctx.tier);
    if (seconds > budget) {
      std::ostringstream os;
      os << "estimated runtime " << std::llround(seconds) << " s exceeds the "
         << tier_name(ctx.tier) << " budget of " << std::llround(budget) << " s";
      violations.push_back({"tier", os.str(), true});
    }
  }
  return violations;
}

RunManifest run(const ExperimentConfig& config) {
  const Preset& preset = find_preset(config.preset);
  std::vector<Violation> violations;
  RunContext ctx = resolve(preset, config, &violations);
  for (const Violation& v : violations)
    if (!v.warning)
      throw ConfigError("invalid configuration: " + v.message);

  std::error_code ec;
  std::filesystem::create_directories(config.out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + config.out_dir.string());
  {
    std::ofstream probe(config.out_dir / ".physlab_write_probe");
    if (!probe) throw IoError("output directory " + config.out_dir.string() + " is not writable");
  }
  std::filesystem::remove(config.out_dir / ".physlab_write_probe", ec);

  RunManifest manifest;
  manifest.preset = preset.name;
  manifest.tier = ctx.resolved["tier"];
  manifest.seed = config.seed;
  manifest.resolved = ctx.resolved;
  manifest.tool_version = PHYSLAB_VERSION;
  manifest.started_at = iso_now();

  try {
    preset.body(ctx);
  } catch (const DivergenceError&) {
    throw;
  } catch (const std::filesystem::filesystem_error& e) {
    throw IoError(e.what());
  }

  manifest.finished_at = iso_now();
  for (const std::string& name : ctx.outputs) {
    OutputFile out;
    out.name = name;
    out.sha256 = sha256_file(config.out_dir / name);
    out.bytes = std::filesystem::file_size(config.out_dir / name);
    manifest.outputs.push_back(std::move(out));
  }

  nlohmann::json j;
  j["tool"] = "physlab";
  j["version"] = manifest.tool_version;
  j["preset"] = manifest.preset;
  j["tier"] = manifest.tier;
  j["seed"] = manifest.seed;
  j["resolved"] = manifest.resolved;
  j["started_at"] = manifest.started_at;
  j["finished_at"] = manifest.finished_at;
  j["outputs"] = nlohmann::json::array();
  for (const OutputFile& f : manifest.outputs)
    j["outputs"].push_back({{"name", f.name}, {"bytes", f.bytes}, {"sha256", f.sha256}});

  manifest.path = config.out_dir / "manifest.json";
  std::ofstream mf(manifest.path, std::ios::binary);
  if (!mf) throw IoError("cannot write manifest " + manifest.path.string());
  mf << j.dump(2) << '\n';
  if (!mf) throw IoError("manifest write failed");
  return manifest;
}

std::map<std::string, std::string> parse_config_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config file " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  int line_no = 0;
  auto trim = [](std::string s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    std::size_t b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  while (std::getline(f, line)) {
    ++line_no;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                        ": expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": empty key");
    out[key] = value;
  }
  return out;
}

}  // namespace physlab::expcli
