#pragma once

// Command-line front end: anatomy generation, training, evaluation
// campaigns, the five-scenario sensitivity study, and single-episode traces.
// Every command resolves one flat RunConfig (defaults < config file <
// GWNAV_* environment variables < flags); its hash, the seed and the code
// version are embedded in every artifact, and re-running with the same
// triple reproduces every output byte for byte.

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <chrono>
#include <climits>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "gwnav/anatomies.hpp"
#include "gwnav/trainer.hpp"

namespace gwnav {
namespace detail {

inline std::string fmt_hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

inline std::uint64_t parse_u64(const std::string& s, const std::string& what) {
  char* end = nullptr;
  errno = 0;
  unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  require(!s.empty() && s[0] != '-' && end != s.c_str() && *end == '\0' &&
              errno == 0,
          ErrorKind::usage, "bad " + what + " '" + s + "'");
  return v;
}

inline long long parse_ll(const std::string& s, const std::string& what) {
  char* end = nullptr;
  errno = 0;
  long long v = std::strtoll(s.c_str(), &end, 10);
  require(!s.empty() && end != s.c_str() && *end == '\0' && errno == 0,
          ErrorKind::usage, "bad " + what + " '" + s + "'");
  return v;
}

inline int parse_int(const std::string& s, const std::string& what) {
  long long v = parse_ll(s, what);
  require(v >= INT_MIN && v <= INT_MAX, ErrorKind::usage,
          what + " out of range '" + s + "'");
  return static_cast<int>(v);
}

} // namespace detail

/// Flat parameter set shared by all commands; unused fields keep their
/// defaults and still participate in the config hash, so the hash names the
/// run exactly. `out` is excluded from the hash: where files land does not
/// change their content.
struct RunConfig {
  std::string command;
  std::uint64_t seed = 1;
  std::string out = "out";
  int episodes = 50;
  std::string trees; // builtin set name, .tree file, or directory
  std::string checkpoint;
  int tree = 0;   // trace: tree index
  int target = 0; // trace: target index
  long long total_steps = 120000;
  int eval_every = 5000;
  int eval_episodes = 20;

  void set(const std::string& key, const std::string& value) {
    if (key == "seed") seed = detail::parse_u64(value, "seed");
    else if (key == "out") out = value;
    else if (key == "episodes") episodes = detail::parse_int(value, "episodes");
    else if (key == "trees") trees = value;
    else if (key == "checkpoint") checkpoint = value;
    else if (key == "tree") tree = detail::parse_int(value, "tree index");
    else if (key == "target") target = detail::parse_int(value, "target index");
    else if (key == "total_steps")
      total_steps = detail::parse_ll(value, "total_steps");
    else if (key == "eval_every")
      eval_every = detail::parse_int(value, "eval_every");
    else if (key == "eval_episodes")
      eval_episodes = detail::parse_int(value, "eval_episodes");
    else fail(ErrorKind::usage, "unknown option '" + key + "'");
  }

  std::string canonical() const {
    std::ostringstream os;
    os << "command=" << command << "\n"
       << "checkpoint=" << checkpoint << "\n"
       << "episodes=" << episodes << "\n"
       << "eval_episodes=" << eval_episodes << "\n"
       << "eval_every=" << eval_every << "\n"
       << "seed=" << seed << "\n"
       << "target=" << target << "\n"
       << "total_steps=" << total_steps << "\n"
       << "tree=" << tree << "\n"
       << "trees=" << trees << "\n";
    return os.str();
  }

  std::uint64_t hash() const { return fnv1a(canonical()); }
};

/// First line of every text artifact (and the annotation in anatomy files).
inline std::string artifact_note(const RunConfig& rc) {
  return "gwnav " + std::string(kVersion) + " config=" +
         detail::fmt_hex(rc.hash()) + " seed=" + std::to_string(rc.seed);
}

inline void apply_config_file(RunConfig& rc, const std::string& path) {
  std::ifstream is(path);
  require(is.good(), ErrorKind::io, "cannot read config file " + path);
  auto trim = [](std::string s) {
    size_t b = s.find_first_not_of(" \t\r");
    size_t e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  std::string line;
  int ln = 0;
  while (std::getline(is, line)) {
    ++ln;
    if (auto hash = line.find('#'); hash != std::string::npos)
      line = line.substr(0, hash);
    std::string t = trim(line);
    if (t.empty()) continue;
    auto eq = t.find('=');
    require(eq != std::string::npos, ErrorKind::usage,
            path + " line " + std::to_string(ln) + ": expected key = value");
    try {
      rc.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    } catch (const Error& e) {
      fail(e.kind(),
           path + " line " + std::to_string(ln) + ": " + e.what());
    }
  }
}

inline void apply_env_overrides(RunConfig& rc) {
  static constexpr const char* keys[] = {
      "seed", "out",    "episodes",    "trees",      "checkpoint",
      "tree", "target", "total_steps", "eval_every", "eval_episodes"};
  for (const char* k : keys) {
    std::string name = "GWNAV_";
    for (const char* p = k; *p; ++p)
      name += static_cast<char>(std::toupper(static_cast<unsigned char>(*p)));
    if (const char* v = std::getenv(name.c_str())) rc.set(k, v);
  }
}

/// args[0] is the command. Precedence: defaults, then --config file, then
/// GWNAV_* variables, then flags in order. `generate` also accepts the set
/// name as a positional argument.
inline RunConfig resolve_config(const std::vector<std::string>& args) {
  RunConfig rc;
  rc.command = args.at(0);
  struct KV {
    std::string k, v;
  };
  std::vector<KV> flags;
  std::vector<std::string> positional;
  std::string config_path;
  for (size_t i = 1; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a.rfind("--", 0) == 0) {
      std::string k = a.substr(2), v;
      if (auto eq = k.find('='); eq != std::string::npos) {
        v = k.substr(eq + 1);
        k = k.substr(0, eq);
      } else {
        require(i + 1 < args.size(), ErrorKind::usage,
                "flag --" + k + " needs a value");
        v = args[++i];
      }
      if (k == "config") config_path = v;
      else flags.push_back({k, v});
    } else {
      positional.push_back(a);
    }
  }
  if (!config_path.empty()) apply_config_file(rc, config_path);
  apply_env_overrides(rc);
  for (const KV& f : flags) rc.set(f.k, f.v);
  if (!positional.empty()) {
    require(rc.command == "generate" && positional.size() == 1,
            ErrorKind::usage, "unexpected argument '" + positional[0] + "'");
    rc.trees = positional[0];
  }
  return rc;
}

inline bool is_builtin_set(const std::string& s) {
  return s == "training4" || s == "sensitivity5" || s == "composed" ||
         s == "coronary_like" || s == "coronary_deformed";
}

/// A builtin set name, a single .tree file, or a directory of .tree files
/// (loaded in filename order).
inline std::vector<VesselTree> resolve_trees(const std::string& spec) {
  require(!spec.empty(), ErrorKind::usage,
          "no anatomy given: pass --trees <set|file|directory>");
  if (is_builtin_set(spec)) return anatomy_set(spec);
  namespace fs = std::filesystem;
  std::error_code ec;
  if (fs::is_directory(spec, ec)) {
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(spec))
      if (e.path().extension() == ".tree") files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    require(!files.empty(), ErrorKind::usage,
            "no .tree files in directory " + spec);
    std::vector<VesselTree> out;
    for (const std::string& f : files) out.push_back(load_tree_file(f));
    return out;
  }
  if (fs::is_regular_file(spec, ec)) return {load_tree_file(spec)};
  fail(ErrorKind::usage,
       "'" + spec + "' is neither a builtin anatomy set nor a file/directory");
}

inline std::vector<std::string> set_file_names(const std::string& set) {
  if (set == "training4")
    return {"training_0.tree", "training_1.tree", "training_2.tree",
            "training_3.tree"};
  if (set == "sensitivity5")
    return {"rotation.tree", "translation.tree", "var1.tree", "var2.tree",
            "var3.tree"};
  if (set == "composed") return {"composed.tree"};
  if (set == "coronary_like") return {"coronary_like.tree"};
  if (set == "coronary_deformed") return {"coronary_deformed.tree"};
  fail(ErrorKind::usage, "unknown anatomy set '" + set + "'");
}

inline int cmd_generate(const RunConfig& rc) {
  require(!rc.trees.empty(), ErrorKind::usage,
          "generate needs an anatomy set name (e.g. gwnav generate training4)");
  std::vector<VesselTree> set = anatomy_set(rc.trees);
  std::vector<std::string> names = set_file_names(rc.trees);
  std::filesystem::create_directories(rc.out);
  const std::string note = artifact_note(rc);
  for (size_t i = 0; i < set.size(); ++i)
    save_tree(set[i], (std::filesystem::path(rc.out) / names[i]).string(),
              note);
  std::cout << "wrote " << set.size() << " anatomy files to " << rc.out
            << "\n";
  return 0;
}

inline int cmd_train(const RunConfig& rc) {
  namespace fs = std::filesystem;
  GuidewireConfig wire;
  EpisodeConfig ep;
  SacConfig sac;
  TrainConfig tc;
  tc.total_steps = rc.total_steps;
  tc.eval_every = rc.eval_every;
  tc.eval_episodes = rc.eval_episodes;
  tc.seed = rc.seed;
  std::vector<VesselTree> trees =
      resolve_trees(rc.trees.empty() ? "training4" : rc.trees);
  Trainer<float> tr(wire, ep, sac, tc, trees);
  fs::create_directories(rc.out);

  // Resume only from an explicitly named checkpoint; the default path in
  // the output directory is always a fresh run, so reruns stay identical.
  fs::path ckpt = rc.checkpoint.empty() ? fs::path(rc.out) / "checkpoint.bin"
                                        : fs::path(rc.checkpoint);
  if (!rc.checkpoint.empty() && fs::exists(ckpt)) {
    std::ifstream is(ckpt, std::ios::binary);
    require(is.good(), ErrorKind::io, "cannot read " + ckpt.string());
    tr.load_checkpoint(is);
    std::cout << "resumed " << ckpt.string() << " at step " << tr.steps()
              << "\n";
  }

  auto save_snapshot = [&]() {
    fs::path tmp = ckpt;
    tmp += ".tmp";
    std::ofstream os(tmp, std::ios::binary);
    require(os.good(), ErrorKind::io, "cannot write " + tmp.string());
    tr.save_checkpoint(os);
    os.close();
    require(os.good(), ErrorKind::io, "write failed for " + tmp.string());
    fs::rename(tmp, ckpt);
  };

  const auto t0 = std::chrono::steady_clock::now();
  const long long resumed_at = tr.steps();
  while (!tr.finished()) {
    tr.advance(1000);
    save_snapshot();
    double el =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    double rate = el > 0 ? static_cast<double>(tr.steps() - resumed_at) / el
                         : 0.0;
    std::cout << "step " << tr.steps() << "/" << tc.total_steps << "  "
              << std::fixed << std::setprecision(1) << rate
              << " steps/s  episodes " << tr.episodes() << "  best "
              << std::setprecision(3) << std::max(0.0, tr.best_success())
              << std::defaultfloat << "\n";
  }
  save_snapshot();

  std::ofstream ms(fs::path(rc.out) / "metrics.csv");
  require(ms.good(), ErrorKind::io, "cannot write metrics.csv");
  ms << "# " << artifact_note(rc) << "\n";
  tr.write_metrics(ms);
  require(ms.good(), ErrorKind::io, "write failed for metrics.csv");

  std::ofstream ps(fs::path(rc.out) / "policy.bin", std::ios::binary);
  require(ps.good(), ErrorKind::io, "cannot write policy.bin");
  tr.save_policy(ps);
  require(ps.good(), ErrorKind::io, "write failed for policy.bin");

  std::cout << "best eval success " << fmt_csv(std::max(0.0, tr.best_success()))
            << " at step " << tr.best_step() << "\n";
  return 0;
}

namespace detail {

inline std::string junctions_field(const EpisodeReport& rep) {
  std::string s;
  for (const JunctionOutcome& j : rep.junctions) {
    if (!s.empty()) s += ';';
    s += std::to_string(j.junction);
    s += j.entered ? ":1" : ":0";
    s += j.passed ? ":1" : ":0";
  }
  return s;
}

template <typename T>
PolicySnapshot<T> load_policy(const std::string& path) {
  require(!path.empty(), ErrorKind::usage, "a --checkpoint file is required");
  std::ifstream is(path, std::ios::binary);
  require(is.good(), ErrorKind::io, "cannot read checkpoint " + path);
  return PolicySnapshot<T>::load(is);
}

// Refuse to run a policy whose observation/physics setup differs from this
// build; anatomy may differ freely (that is the zero-shot case).
inline void guard_config(const CheckpointHeader& h, const GuidewireConfig& w,
                         const EpisodeConfig& e) {
  require(h.config_hash == fingerprint(w, e), ErrorKind::hash_mismatch,
          "checkpoint was trained under a different wire/episode "
          "configuration");
}

} // namespace detail

inline int cmd_eval(const RunConfig& rc) {
  namespace fs = std::filesystem;
  require(rc.episodes >= 0, ErrorKind::usage, "--episodes must be >= 0");
  PolicySnapshot<float> snap = detail::load_policy<float>(rc.checkpoint);
  GuidewireConfig wire;
  EpisodeConfig ep;
  detail::guard_config(snap.header, wire, ep);
  std::vector<VesselTree> trees =
      resolve_trees(rc.trees.empty() ? "training4" : rc.trees);
  Environment env(wire, ep, trees);
  auto policy = [&](const Observation& o) {
    return snap.agent.act_deterministic(o);
  };

  const std::uint64_t base =
      fnv1a("eval-campaign", fnv1a_mix(rc.seed, kFnvOffset));
  std::ostringstream rows;
  int successes = 0;
  for (int e = 0; e < rc.episodes; ++e) {
    const std::uint64_t eseed = fnv1a_mix(static_cast<std::uint64_t>(e), base);
    Rng rng(eseed);
    int tree = static_cast<int>(rng.uniform_index(env.num_trees()));
    int target = static_cast<int>(
        rng.uniform_index(env.tree_at(tree).targets.size()));
    EpisodeReport rep = navigate_tree(env, policy, tree, target, rng);
    successes += rep.success ? 1 : 0;
    rows << e << ',' << tree << ',' << target << ',' << detail::fmt_hex(eseed)
         << ',' << (rep.truncated ? "truncated" : to_string(rep.terminated))
         << ',' << rep.control_steps << ',' << detail::junctions_field(rep)
         << '\n';
  }
  double rate =
      rc.episodes > 0 ? static_cast<double>(successes) / rc.episodes : 0.0;

  fs::create_directories(rc.out);
  std::ofstream os(fs::path(rc.out) / "report.csv");
  require(os.good(), ErrorKind::io, "cannot write report.csv");
  os << "# " << artifact_note(rc) << "\n";
  os << "# policy step=" << snap.header.step << " trained_seed="
     << snap.header.seed << "\n";
  os << "episode,tree,target,seed,outcome,steps,junctions\n" << rows.str();
  os << "# success_rate " << fmt_csv(rate) << " successes " << successes
     << " episodes " << rc.episodes << "\n";
  require(os.good(), ErrorKind::io, "write failed for report.csv");
  std::cout << "success_rate " << fmt_csv(rate) << " (" << successes << "/"
            << rc.episodes << ")\n";
  return 0;
}

inline int cmd_sensitivity(const RunConfig& rc) {
  namespace fs = std::filesystem;
  require(rc.episodes >= 0, ErrorKind::usage, "--episodes must be >= 0");
  PolicySnapshot<float> snap = detail::load_policy<float>(rc.checkpoint);
  GuidewireConfig wire;
  EpisodeConfig ep;
  detail::guard_config(snap.header, wire, ep);
  auto policy = [&](const Observation& o) {
    return snap.agent.act_deterministic(o);
  };

  std::vector<std::pair<std::string, VesselTree>> scenarios;
  scenarios.emplace_back("original", anatomy_set("training4")[0]);
  std::vector<VesselTree> variants = anatomy_set("sensitivity5");
  const char* names[] = {"rotation", "translation", "var1", "var2", "var3"};
  for (size_t i = 0; i < variants.size(); ++i)
    scenarios.emplace_back(names[i], std::move(variants[i]));

  // One episode-seed stream shared by all scenarios: matched seeds give the
  // rigidly moved copies geometrically identical episodes.
  const std::uint64_t base =
      fnv1a("sensitivity", fnv1a_mix(rc.seed, kFnvOffset));
  std::ostringstream rows;
  std::cout << "scenario      episodes successes rate\n";
  for (const auto& [name, tree] : scenarios) {
    Environment env(wire, ep, {tree});
    int successes = 0;
    for (int e = 0; e < rc.episodes; ++e) {
      Rng rng(fnv1a_mix(static_cast<std::uint64_t>(e), base));
      int target = static_cast<int>(
          rng.uniform_index(env.tree_at(0).targets.size()));
      successes += navigate_tree(env, policy, 0, target, rng).success ? 1 : 0;
    }
    double rate =
        rc.episodes > 0 ? static_cast<double>(successes) / rc.episodes : 0.0;
    rows << name << ',' << rc.episodes << ',' << successes << ','
         << fmt_csv(rate) << '\n';
    std::cout << std::left << std::setw(14) << name << std::right
              << std::setw(8) << rc.episodes << std::setw(10) << successes
              << std::setw(7) << std::fixed << std::setprecision(2) << rate
              << std::defaultfloat << "\n";
  }

  fs::create_directories(rc.out);
  std::ofstream os(fs::path(rc.out) / "sensitivity.csv");
  require(os.good(), ErrorKind::io, "cannot write sensitivity.csv");
  os << "# " << artifact_note(rc) << "\n";
  os << "scenario,episodes,successes,success_rate\n" << rows.str();
  require(os.good(), ErrorKind::io, "write failed for sensitivity.csv");
  return 0;
}

inline int cmd_trace(const RunConfig& rc) {
  namespace fs = std::filesystem;
  PolicySnapshot<float> snap = detail::load_policy<float>(rc.checkpoint);
  GuidewireConfig wire;
  EpisodeConfig ep;
  detail::guard_config(snap.header, wire, ep);
  std::vector<VesselTree> trees =
      resolve_trees(rc.trees.empty() ? "training4" : rc.trees);
  require(rc.tree >= 0 && rc.tree < static_cast<int>(trees.size()),
          ErrorKind::usage, "tree index out of range");
  require(rc.target >= 0 &&
              rc.target <
                  static_cast<int>(trees[rc.tree].targets.size()),
          ErrorKind::usage, "unknown target index for this tree");
  Environment env(wire, ep, trees);
  auto policy = [&](const Observation& o) {
    return snap.agent.act_deterministic(o);
  };

  Rng rng = substream(rc.seed, "trace");
  env.reset_to(rc.tree, rc.target, rng);
  std::ostringstream trace_rows, tip_rows;
  auto tip_row = [&](const Environment& e) {
    const Vec3& tip = e.state().pos[0];
    tip_rows << e.control_steps() << ',' << fmt_csv(tip(0)) << ','
             << fmt_csv(tip(1)) << ',' << fmt_csv(tip(2)) << '\n';
  };
  tip_row(env);
  EpisodeReport rep = run_episode(
      env, policy,
      [&](const Environment& e, double action, const StepResult& r) {
        trace_rows << e.control_steps();
        for (double v : r.observation.flatten())
          trace_rows << ',' << fmt_csv(v);
        trace_rows << ',' << fmt_csv(action) << ',' << fmt_csv(r.reward)
                   << ',' << to_string(r.terminated) << ','
                   << (r.truncated ? 1 : 0) << '\n';
        tip_row(e);
      });

  fs::create_directories(rc.out);
  std::ofstream ts(fs::path(rc.out) / "trace.csv");
  require(ts.good(), ErrorKind::io, "cannot write trace.csv");
  ts << "# " << artifact_note(rc) << "\n";
  ts << "step,theta_now_0,theta_now_1,theta_now_2,theta_prev_0,theta_prev_1,"
        "theta_prev_2,lambda_now,lambda_prev,prev_action,omega,s_speed,"
        "action,reward,outcome,truncated\n";
  ts << trace_rows.str();
  require(ts.good(), ErrorKind::io, "write failed for trace.csv");

  std::ofstream ps(fs::path(rc.out) / "tip.csv");
  require(ps.good(), ErrorKind::io, "cannot write tip.csv");
  ps << "# " << artifact_note(rc) << "\n";
  ps << "step,x,y,z\n" << tip_rows.str();
  require(ps.good(), ErrorKind::io, "write failed for tip.csv");

  std::cout << "episode "
            << (rep.truncated ? "truncated" : to_string(rep.terminated))
            << " after " << rep.control_steps << " steps\n";
  return 0;
}

inline void print_usage(std::ostream& os) {
  os << "gwnav - guidewire navigation: simulation, training, evaluation\n"
     << "\n"
     << "usage: gwnav <command> [options]\n"
     << "\n"
     << "commands:\n"
     << "  generate <set>  write a builtin anatomy set as .tree files\n"
     << "  train           train a steering policy\n"
     << "  eval            run deterministic episodes, write report.csv\n"
     << "  sensitivity     five-scenario robustness study of a policy\n"
     << "  trace           record one episode as CSV plus tip polyline\n"
     << "\n"
     << "options:\n"
     << "  --config FILE      read key = value defaults from FILE\n"
     << "  --seed N           root random seed (default 1)\n"
     << "  --out DIR          output directory (default out)\n"
     << "  --episodes N       evaluation episode count (default 50)\n"
     << "  --trees SPEC       builtin set (training4, sensitivity5, composed,\n"
     << "                     coronary_like, coronary_deformed), a .tree\n"
     << "                     file, or a directory of them\n"
     << "  --checkpoint FILE  policy/training checkpoint\n"
     << "  --tree N           tree index for trace (default 0)\n"
     << "  --target N         target index for trace (default 0)\n"
     << "  --total_steps N    training steps (default 120000)\n"
     << "  --eval_every N     steps between training evals (default 5000)\n"
     << "  --eval_episodes N  episodes per training eval (default 20)\n"
     << "\n"
     << "every option can come from the environment as GWNAV_<OPTION>\n"
     << "exit codes: 0 ok, 2 usage, 3 checkpoint mismatch, 4 runtime fault\n";
}

inline int run_cli(const std::vector<std::string>& args) {
  try {
    if (args.empty()) {
      print_usage(std::cerr);
      return 2;
    }
    if (args[0] == "--help" || args[0] == "-h" || args[0] == "help") {
      print_usage(std::cout);
      return 0;
    }
    RunConfig rc = resolve_config(args);
    if (rc.command == "generate") return cmd_generate(rc);
    if (rc.command == "train") return cmd_train(rc);
    if (rc.command == "eval") return cmd_eval(rc);
    if (rc.command == "sensitivity") return cmd_sensitivity(rc);
    if (rc.command == "trace") return cmd_trace(rc);
    fail(ErrorKind::usage, "unknown command '" + rc.command + "'");
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (e.kind() == ErrorKind::usage) return 2;
    if (e.kind() == ErrorKind::hash_mismatch) return 3;
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}

inline int run_cli(int argc, char** argv) {
  return run_cli(std::vector<std::string>(argv + 1, argv + argc));
}

} // namespace gwnav
