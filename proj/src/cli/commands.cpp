#include "dvbf/cli/commands.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "dvbf/binary_io.hpp"
#include "dvbf/cli/run_config.hpp"
#include "dvbf/empower/empower.hpp"
#include "dvbf/env/dataset.hpp"
#include "dvbf/errors.hpp"
#include "dvbf/eval/eval.hpp"
#include "dvbf/image.hpp"
#include "dvbf/model/checkpoint.hpp"
#include "dvbf/objective/objective.hpp"
#include "dvbf/train/trainer.hpp"

namespace dvbf::cli {

namespace fs = std::filesystem;

namespace {

RunConfig load_config(const std::string& path) {
  if (path.empty()) return RunConfig{};
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::stringstream text;
  text << in.rdbuf();
  return RunConfig::parse(text.str());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

env::BallConfig ball_for(const RunConfig& cfg, const model::Model<float>& m) {
  auto ball = cfg.ball;
  ball.image_size = m.config().height;
  return ball;
}

// Latent pool for empowerment training: filtered means of every frame.
diff::Tensor<float> latent_pool(const model::Model<float>& m, const env::SequenceBatch& data) {
  const auto means = eval::filtered_means(m, data);
  const std::size_t nz = m.config().latent_dim;
  std::vector<float> values(means.begin(), means.end());
  return diff::Tensor<float>({means.size() / nz, nz}, std::move(values));
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Deep variational Bayes filter tools", "dvbf"};
  app.require_subcommand(1);

  std::string config_path;
  const auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value run configuration")->check(CLI::ExistingFile);
  };

  // gen-data
  std::string env_name = "pendulum", out_path, data_path, ckpt_path, nets_path, resume_path, policy = "empowerment";
  std::size_t n_seqs = 500, steps = 40, image_size = 0, seq = 0;
  std::uint64_t seed = 1;
  auto* gen = app.add_subcommand("gen-data", "generate a sequence dataset");
  gen->add_option("--env", env_name)->check(CLI::IsMember({"pendulum", "ball"}));
  gen->add_option("--n", n_seqs)->check(CLI::PositiveNumber);
  gen->add_option("--steps", steps)->check(CLI::Range(2, 1 << 20));
  gen->add_option("--seed", seed);
  gen->add_option("--image-size", image_size);
  gen->add_option("--out", out_path)->required();
  add_config(gen);

  auto* tr = app.add_subcommand("train", "train a model");
  add_config(tr);
  tr->add_option("--data", data_path)->required()->check(CLI::ExistingFile);
  tr->add_option("--out", out_path, "output directory")->required();
  tr->add_option("--resume", resume_path)->check(CLI::ExistingFile);

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on the held-out split");
  add_config(ev);
  ev->add_option("--checkpoint", ckpt_path)->required()->check(CLI::ExistingFile);
  ev->add_option("--data", data_path)->required()->check(CLI::ExistingFile);
  ev->add_option("--out", out_path, "output directory")->required();

  auto* st = app.add_subcommand("strips", "generated / reconstructed / original frames as PGM");
  st->add_option("--checkpoint", ckpt_path)->required()->check(CLI::ExistingFile);
  st->add_option("--data", data_path)->required()->check(CLI::ExistingFile);
  st->add_option("--seq", seq);
  st->add_option("--out", out_path, "PGM file")->required();

  double obs_dim = 0, latent_dim = 0;
  auto* sb = app.add_subcommand("suggest-beta", "beta for an observation / latent size pair");
  sb->add_option("obs_dim,--obs-dim", obs_dim)->required()->check(CLI::PositiveNumber);
  sb->add_option("latent_dim,--latent-dim", latent_dim)->required()->check(CLI::PositiveNumber);

  auto* et = app.add_subcommand("emp-train", "train empowerment networks on a ball model");
  add_config(et);
  et->add_option("--checkpoint", ckpt_path)->required()->check(CLI::ExistingFile);
  et->add_option("--data", data_path)->required()->check(CLI::ExistingFile);
  et->add_option("--out", out_path, "output directory")->required();

  auto* em = app.add_subcommand("emp-map", "empowerment over ball positions");
  add_config(em);
  em->add_option("--checkpoint", ckpt_path)->required()->check(CLI::ExistingFile);
  em->add_option("--nets", nets_path)->required()->check(CLI::ExistingFile);
  em->add_option("--out", out_path, "output directory")->required();

  auto* er = app.add_subcommand("emp-rollout", "closed-loop ball agents as CSV");
  add_config(er);
  er->add_option("--checkpoint", ckpt_path)->required()->check(CLI::ExistingFile);
  er->add_option("--nets", nets_path)->required()->check(CLI::ExistingFile);
  er->add_option("--policy", policy)->check(CLI::IsMember({"empowerment", "random"}));
  er->add_option("--out", out_path, "CSV file")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage: " << e.what() << "\n";
    return kUsage;
  }

  try {
    const RunConfig cfg = load_config(config_path);

    if (*gen) {
      env::PendulumConfig pc = cfg.pendulum;
      env::BallConfig bc = cfg.ball;
      if (config_path.empty()) bc.image_size = env::BallConfig{}.image_size;
      if (image_size) pc.image_size = bc.image_size = image_size;
      const auto e = env::make_environment(env_name, pc, bc);
      const auto data = env::generate_dataset(*e, env::uniform_controls(e->control_bound()), n_seqs, steps, seed);
      const auto bytes = env::encode_sequences(data);
      io::write_file(out_path, bytes);
      out << "fnv1a64 " << hex64(io::fnv1a64(bytes)) << "\n";
      return kOk;
    }

    if (*tr) {
      const auto data = env::read_sequences(data_path);
      auto [train_split, held] = env::split_holdout(data);
      auto mcfg = cfg.model;
      mcfg.channels = data.channels;
      mcfg.height = data.height;
      mcfg.width = data.width;
      mcfg.control_dim = data.control_dim;
      make_dir(out_path);
      write_text(fs::path(out_path) / "run.cfg", cfg.emit());
      model::Checkpoint resume;
      if (!resume_path.empty()) resume = model::read_checkpoint(resume_path);
      const auto result = train::train(train_split, mcfg, cfg.train, out_path, resume_path.empty() ? nullptr : &resume);
      const auto& last = result.history.back();
      out << "iterations " << result.history.size() << " final_loss " << last.loss << "\n";
      return kOk;
    }

    if (*ev) {
      auto ecfg = cfg.eval;
      if (config_path.empty()) ecfg.env_name.clear();
      const auto res = eval::evaluate_files(ckpt_path, data_path, out_path, ecfg);
      out << res.record.to_keyvalues().emit();
      return kOk;
    }

    if (*st) {
      const auto m = train::load_model(model::read_checkpoint(ckpt_path));
      const auto data = env::read_sequences(data_path);
      if (seq >= data.n_seqs) throw ContractError("--seq out of range");
      write_pgm(eval::strip_image(m, data, seq), out_path);
      return kOk;
    }

    if (*sb) {
      out << objective::suggest_beta(obs_dim, latent_dim) << "\n";
      return kOk;
    }

    if (*et) {
      const auto m = train::load_model(model::read_checkpoint(ckpt_path));
      const auto data = env::read_sequences(data_path);
      auto [train_split, held] = env::split_holdout(data);
      empower::EmpowermentNets<float> nets(m.config().latent_dim, m.config().control_dim,
                                           ball_for(cfg, m).max_force, cfg.empower);
      const auto history = empower::train_empowerment(nets, empower::prior_dynamics(m), latent_pool(m, train_split),
                                                       cfg.empower);
      make_dir(out_path);
      model::write_checkpoint(empower::nets_checkpoint(nets), fs::path(out_path) / "empower.ckpt");
      std::ostringstream log;
      log << "iteration,bound,entropy\n" << std::setprecision(9);
      for (std::size_t i = 0; i < history.size(); ++i)
        log << i << "," << history[i].bound << "," << history[i].entropy << "\n";
      write_text(fs::path(out_path) / "empower_log.csv", log.str());
      out << "bound " << history.back().bound << "\n";
      return kOk;
    }

    if (*em) {
      const auto m = train::load_model(model::read_checkpoint(ckpt_path));
      const auto nets = empower::load_nets(model::read_checkpoint(nets_path));
      const auto map =
          empower::empowerment_map(nets, m, ball_for(cfg, m), cfg.map_cells, cfg.map_samples, cfg.empower.seed);
      make_dir(out_path);
      write_text(fs::path(out_path) / "map.txt", map.to_text());
      write_pgm(map.heat_image(), fs::path(out_path) / "map.pgm");
      out << "edge " << map.edge_mean() << " interior " << map.interior_mean() << "\n";
      return kOk;
    }

    if (*er) {
      const auto m = train::load_model(model::read_checkpoint(ckpt_path));
      const auto nets = empower::load_nets(model::read_checkpoint(nets_path));
      const env::BallEnv ball(ball_for(cfg, m));
      const auto points = empower::empowerment_rollout(
          nets, m, ball, cfg.rollout_agents, cfg.rollout_steps, cfg.empower.seed,
          policy == "random" ? empower::RolloutPolicy::kRandom : empower::RolloutPolicy::kEmpowerment);
      write_text(out_path, empower::rollout_csv(points));
      out << "terminal_wall_distance " << empower::terminal_wall_distance(points, ball.config()) << "\n";
      return kOk;
    }
  } catch (const IoError& e) {
    err << "io error: " << e.what() << "\n";
    return kIo;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const DomainError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const ContractError& e) {
    err << "usage: " << e.what() << "\n";
    return kUsage;
  } catch (const DimensionError& e) {
    err << "usage: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}

}  // namespace dvbf::cli
