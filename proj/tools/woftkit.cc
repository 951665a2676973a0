// woftkit command-line tool: synth, track, eval, ablate, gradcheck, replay.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "woftkit/autodiff.h"
#include "woftkit/error.h"
#include "woftkit/eval.h"
#include "woftkit/experiments.h"
#include "woftkit/flow.h"
#include "woftkit/io.h"
#include "woftkit/sequence.h"
#include "woftkit/synth.h"
#include "woftkit/tracker.h"

#ifndef WOFTKIT_VERSION
#define WOFTKIT_VERSION "dev"
#endif

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace woftkit;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

// Raised for bad flag combinations the parser cannot express.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Clock = std::chrono::steady_clock;

double SecondsSince(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Manifest written next to an output path as <output>.manifest.json.
struct Manifest {
  json j;
  Manifest(const std::string& sub, const std::vector<std::string>& argv) {
    j["subcommand"] = sub;
    j["tool_version"] = WOFTKIT_VERSION;
    j["argv"] = argv;
    j["config"] = json::object();
    j["seeds"] = json::object();
    j["inputs"] = json::array();
    j["outputs"] = json::array();
    j["stages"] = json::object();
  }
  void Stage(const std::string& name, double seconds) { j["stages"][name] = seconds; }
  void WriteNextTo(const fs::path& output) const {
    fs::path base = output;
    if (!base.has_filename()) base = base.parent_path();
    WriteFileAtomic(base.string() + ".manifest.json", j.dump(2) + "\n");
  }
};

int ResolveJobs(int flag) {
  if (flag > 0) return flag;
  const int hw = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return JobsFromEnvironment(hw);
}

// Runs fn(i) for i in [0, n) on up to jobs threads; rethrows the first error.
template <typename Fn>
void ParallelFor(int n, int jobs, Fn fn) {
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex mu;
  auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int k = 1; k < std::min(jobs, n); ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

FlowProfile ParseProfile(const std::string& name) {
  if (name == "clean") return CleanFlow();
  if (name == "contaminated") return ContaminatedFlow();
  throw UsageError("unknown flow profile: " + name);
}

std::vector<double> ParseThresholds(const std::string& s) {
  std::string spaced = s;
  std::replace(spaced.begin(), spaced.end(), ',', ' ');
  std::vector<double> out;
  try {
    out = ParseNumbers(spaced);
  } catch (const Error&) {
    throw UsageError("bad --thresholds: " + s);
  }
  if (out.empty()) throw UsageError("no thresholds given");
  for (double t : out)
    if (!(t >= 0)) throw UsageError("thresholds must be >= 0");
  return out;
}

std::string PrecisionLabel(double t) { return "P@" + FormatDouble(t); }

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::string src_dir;
  bool procedural = false;
  int length = 501;
  int count = 1;
  double corner_frac = 0.2;
  double blur_max = 20.0;
  int quality = 25;
  std::uint64_t seed = 0;
  std::string out;
  double smoothness = 0.35;
  int width = 320;
  int height = 240;
  std::string codec;
  int jobs = 0;
};

std::vector<fs::path> ListImages(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::kIoError, "not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string ext = e.path().extension().string();
    if (ext == ".png" || ext == ".pgm" || ext == ".ppm" || ext == ".pnm") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw Error(ErrorCode::kIoError, "no images in " + dir.string());
  return out;
}

int CmdSynth(const SynthArgs& a, const std::vector<std::string>& argv) {
  if (a.procedural == !a.src_dir.empty()) throw UsageError("give exactly one of --src-dir or --procedural");
  SuiteSpec suite;
  suite.name = "seq";
  suite.sequences = a.count;
  suite.length = a.length;
  suite.width = a.width;
  suite.height = a.height;
  suite.motion_smoothness = a.smoothness;
  suite.degradation.corner_perturbation_frac = a.corner_frac;
  suite.degradation.blur_max_len = a.blur_max;
  suite.degradation.degrade_quality = a.quality;
  suite.degradation.external_codec = a.codec;
  suite.seed = a.seed;
  suite.degradation.Validate();
  if (a.length < 1 || a.count < 1) throw UsageError("--length and --count must be >= 1");

  std::vector<fs::path> sources;
  if (!a.src_dir.empty()) sources = ListImages(a.src_dir);

  Manifest m("synth", argv);
  m.j["config"] = {{"procedural", a.procedural}, {"src_dir", a.src_dir}, {"length", a.length},
                   {"count", a.count}, {"corner_frac", a.corner_frac}, {"blur_max", a.blur_max},
                   {"quality", a.quality}, {"smoothness", a.smoothness}, {"width", a.width},
                   {"height", a.height}, {"codec", a.codec}};
  m.j["seeds"] = {{"seed", a.seed}};
  for (const auto& s : sources) m.j["inputs"].push_back(s.string());

  const fs::path out(a.out);
  fs::create_directories(out);
  const auto t0 = Clock::now();
  std::vector<std::string> names(a.count);
  ParallelFor(a.count, ResolveJobs(a.jobs), [&](int i) {
    SequenceRecord rec;
    if (sources.empty()) {
      rec = BuildSuiteSequence(suite, i).record;
    } else {
      SequenceSpec ss;
      ss.length = a.length;
      ss.motion_smoothness = a.smoothness;
      ss.degradation = suite.degradation;
      ss.degradation.rng_seed = DeriveSeed(a.seed, {static_cast<std::uint64_t>(i), 2});
      rec = MakeSequence(ReadImage(sources[i % sources.size()]), ss);
      char name[32];
      std::snprintf(name, sizeof(name), "seq_%03d", i);
      rec.name = name;
    }
    names[i] = rec.name;
    WriteSequence(out / rec.name, rec);
  });
  m.Stage("generate", SecondsSince(t0));
  for (const auto& n : names) m.j["outputs"].push_back((out / n).string());
  m.WriteNextTo(out);
  std::cout << "wrote " << a.count << " sequences of " << a.length << " frames to " << out.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// track

struct TrackArgs {
  std::string seq;
  std::string out;
  std::string estimator = "weighted_lsq";
  std::string prewarp = "controlled";
  std::string weights = "fb";
  double fb_sigma = 2.0;
  double inlier_thresh = 5.0;
  double lost_ratio = 0.2;
  int max_lost = 10;
  int max_corr = 500;
  int downscale = 1;
  std::string flow = "synthetic";
  std::string flow_dir;
  std::string flow_profile = "clean";
  std::uint64_t seed = 0;
};

int CmdTrack(const TrackArgs& a, const std::vector<std::string>& argv) {
  TrackerConfig cfg;
  cfg.inlier_threshold = a.inlier_thresh;
  cfg.lost_ratio = a.lost_ratio;
  cfg.max_lost_frames = a.max_lost;
  if (a.max_corr < 4) throw UsageError("--max-corr must be >= 4");
  cfg.max_correspondences = static_cast<std::size_t>(a.max_corr);
  cfg.downscale_factor = a.downscale;
  cfg.estimator = ParseEstimator(a.estimator);
  cfg.pre_warp_mode = ParsePreWarpMode(a.prewarp);
  cfg.rng_seed = a.seed;
  cfg.Validate();
  if (a.weights != "fb" && a.weights != "uniform") throw UsageError("--weights must be fb or uniform");
  if (a.flow == "file" && a.flow_dir.empty()) throw UsageError("--flow file needs --flow-dir");
  const FlowProfile profile = ParseProfile(a.flow_profile);

  Manifest m("track", argv);
  m.j["config"] = {{"estimator", a.estimator}, {"prewarp", a.prewarp}, {"weights", a.weights},
                   {"fb_sigma", a.fb_sigma}, {"inlier_thresh", a.inlier_thresh},
                   {"lost_ratio", a.lost_ratio}, {"max_lost", a.max_lost}, {"max_corr", a.max_corr},
                   {"downscale", a.downscale}, {"flow", a.flow}, {"flow_dir", a.flow_dir},
                   {"flow_profile", a.flow_profile}};
  m.j["seeds"] = {{"seed", a.seed}};
  m.j["inputs"].push_back(a.seq);

  auto t0 = Clock::now();
  const SequenceRecord seq = ReadSequence(a.seq);
  m.Stage("load", SecondsSince(t0));

  std::unique_ptr<WeightProvider> weights;
  if (a.weights == "fb") {
    weights = std::make_unique<FbConsistencyWeightProvider>(a.fb_sigma);
  } else {
    weights = std::make_unique<UniformWeightProvider>();
  }

  std::unique_ptr<FlowProvider> flow;
  if (a.flow == "synthetic") {
    if (seq.gt_poses.size() != seq.size() || !seq.gt_present.empty() &&
        std::find(seq.gt_present.begin(), seq.gt_present.end(), 0) != seq.gt_present.end()) {
      throw Error(ErrorCode::kIoError, "synthetic flow needs ground truth for every frame");
    }
    SuiteSpec suite;
    suite.length = static_cast<int>(seq.size());
    suite.seed = a.seed;
    flow = std::make_unique<SyntheticFlowProvider>(seq.gt_poses, SuiteFlowOptions(suite, profile, 0));
  } else if (a.flow == "lk") {
    flow = std::make_unique<LucasKanadeFlowProvider>();
  } else if (a.flow == "file") {
    auto file = std::make_unique<FileFlowProvider>(a.flow_dir);
    // Local flow is needed by the never mode and by every fallback.
    file->CheckAvailable(static_cast<int>(seq.size()), weights->needs_backward(), true);
    flow = std::move(file);
  } else {
    throw UsageError("--flow must be synthetic, lk or file");
  }

  t0 = Clock::now();
  const std::vector<FrameResult> results = TrackFrames(seq.frames, seq.template_mask, cfg, *flow, *weights);
  m.Stage("track", SecondsSince(t0));
  StageTimings sum;
  for (const auto& r : results) {
    sum.prewarp_ms += r.timings.prewarp_ms;
    sum.global_ms += r.timings.global_ms;
    sum.local_ms += r.timings.local_ms;
  }
  m.Stage("prewarp", sum.prewarp_ms / 1000);
  m.Stage("global", sum.global_ms / 1000);
  m.Stage("local", sum.local_ms / 1000);

  std::string trace;
  int lost = 0;
  for (const auto& r : results) {
    trace += FormatTraceLine(r) + "\n";
    lost += r.status == TrackStatus::kLost;
  }
  const fs::path out(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  WriteFileAtomic(out, trace);
  m.j["outputs"].push_back(out.string());
  m.WriteNextTo(out);
  std::cout << results.size() << " frames, " << lost << " lost";
  if (seq.gt_poses.size() == results.size()) {
    std::vector<Homography> poses;
    for (const auto& r : results) poses.push_back(r.pose);
    const EvalReport rep = EvaluateSequence(seq, poses);
    for (const auto& [t, p] : rep.p_at) std::cout << ", " << PrecisionLabel(t) << " " << FormatDouble(p);
  }
  std::cout << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

// Accepts tracker traces and plain nine-number pose files (such as gt.txt).
std::vector<Homography> ReadPoses(const fs::path& path) {
  std::istringstream in(ReadFile(path));
  std::vector<Homography> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream probe(line);
    std::string a, b;
    probe >> a >> b;
    const bool traced = !b.empty() && std::isalpha(static_cast<unsigned char>(b[0])) && b != "nan" &&
                        b != "inf";
    if (traced) {
      out.push_back(ParseTraceLine(line).pose);
    } else {
      const std::vector<double> nine = ParseNumbers(line);
      if (nine.size() != 9) throw Error(ErrorCode::kIoError, "bad pose line in " + path.string());
      out.push_back(ParseHomography(nine));
    }
  }
  return out;
}

struct EvalArgs {
  std::vector<std::string> seqs;
  std::vector<std::string> traces;
  std::string thresholds = "5,15";
  std::string out;
};

int CmdEval(const EvalArgs& a, const std::vector<std::string>& argv) {
  if (a.seqs.size() != a.traces.size()) throw UsageError("give one --trace per --seq");
  const std::vector<double> thresholds = ParseThresholds(a.thresholds);
  Manifest m("eval", argv);
  m.j["config"] = {{"thresholds", thresholds}};
  const auto t0 = Clock::now();
  std::vector<EvalReport> reports;
  for (std::size_t i = 0; i < a.seqs.size(); ++i) {
    const SequenceRecord seq = ReadSequence(a.seqs[i]);
    const std::vector<Homography> poses = ReadPoses(a.traces[i]);
    EvalReport r = EvaluateSequence(seq, poses, thresholds);
    r.name = seq.name.empty() ? fs::path(a.seqs[i]).filename().string() : seq.name;
    reports.push_back(std::move(r));
    m.j["inputs"].push_back({{"sequence", a.seqs[i]}, {"trace", a.traces[i]}});
  }
  EvalReport agg = AggregateReports(reports, thresholds);
  agg.name = "aggregate";
  m.Stage("eval", SecondsSince(t0));

  std::string header = "sequence";
  for (double t : thresholds) header += "," + PrecisionLabel(t);
  std::string table = header + "\n";
  auto row = [&](const EvalReport& r) {
    std::string s = r.name;
    for (double t : thresholds) s += "," + FormatDouble(r.p_at.at(t));
    return s + "\n";
  };
  for (const auto& r : reports) table += row(r);
  table += row(agg);
  std::cout << table;

  if (!a.out.empty()) {
    const fs::path out(a.out);
    fs::create_directories(out);
    json report;
    report["aggregate"] = ReportToJson(agg);
    report["sequences"] = json::array();
    for (const auto& r : reports) report["sequences"].push_back(ReportToJson(r));
    WriteFileAtomic(out / "report.json", report.dump(2) + "\n");
    WriteFileAtomic(out / "curve.csv", CurveToCsv(agg.curve));
    WriteFileAtomic(out / "precision.csv", table);
    for (const char* f : {"report.json", "curve.csv", "precision.csv"}) m.j["outputs"].push_back((out / f).string());
    m.WriteNextTo(out);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// ablate

struct AblateArgs {
  bool quick = false;
  int sequences = 0;
  int length = 0;
  std::string suite = "contaminated";
  std::uint64_t seed = 1;
  std::string out = "ablation.csv";
  int jobs = 0;
};

int CmdAblate(const AblateArgs& a, const std::vector<std::string>& argv) {
  SuiteSpec suite;
  if (a.suite == "clean") {
    suite = CleanSuite(a.seed);
  } else if (a.suite == "contaminated") {
    suite = ContaminatedSuite(a.seed);
  } else {
    throw UsageError("--suite must be clean or contaminated");
  }
  if (a.quick) {
    suite.sequences = 4;
    suite.length = 151;
  }
  if (a.sequences > 0) suite.sequences = a.sequences;
  if (a.length > 0) suite.length = a.length;

  Manifest m("ablate", argv);
  m.j["config"] = {{"suite", a.suite}, {"sequences", suite.sequences}, {"length", suite.length},
                   {"width", suite.width}, {"height", suite.height}, {"quick", a.quick}};
  m.j["seeds"] = {{"seed", a.seed}};

  RunOptions opts;
  opts.jobs = ResolveJobs(a.jobs);
  std::mutex mu;
  opts.on_sequence = [&](int i, const std::string& label, const EvalReport& r) {
    std::lock_guard<std::mutex> lock(mu);
    std::cerr << "  seq " << i << " " << label << " P@5 " << FormatDouble(r.p_at.at(5.0)) << "\n";
  };
  const auto results = RunSuite(suite, AblationRuns(a.seed), opts);
  if (!results.empty()) m.Stage("generate", results.front().generation_seconds);
  for (const auto& r : results) m.Stage("run:" + r.spec.label, r.seconds);

  const std::string csv = AblationCsv(results);
  const fs::path out(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  WriteFileAtomic(out, csv);
  m.j["outputs"].push_back(out.string());
  std::cout << csv;

  bool ok = true;
  json checks = json::array();
  for (const auto& c : CheckAblationOrdering(results)) {
    std::cout << (c.passed ? "ok   " : "FAIL ") << c.description << " (" << FormatDouble(c.lhs) << " vs "
              << FormatDouble(c.rhs) << ")\n";
    checks.push_back({{"check", c.description}, {"lhs", c.lhs}, {"rhs", c.rhs}, {"passed", c.passed}});
    ok = ok && c.passed;
  }
  m.j["ordering_checks"] = checks;
  m.WriteNextTo(out);
  return ok ? kExitOk : kExitRuntime;
}

// ---------------------------------------------------------------------------
// gradcheck

// Blocks separated by blank lines; each line "x y x' y' [w]" (w defaults to
// 1), optional "gt h11 ... h33" and "eval x y" lines.
std::vector<GradCheckInstance> ReadGradCheckFile(const fs::path& path) {
  std::istringstream in(ReadFile(path));
  std::vector<GradCheckInstance> out;
  GradCheckInstance cur;
  bool open = false;
  auto flush = [&] {
    if (!open) return;
    if (cur.eval_points.empty()) {
      double x1 = 0, y1 = 0;
      for (const auto& p : cur.set.pairs) {
        x1 = std::max(x1, p.source.x);
        y1 = std::max(y1, p.source.y);
      }
      cur.eval_points = {{0, 0}, {x1, 0}, {x1, y1}, {0, y1}};
    }
    out.push_back(std::move(cur));
    cur = {};
    open = false;
  };
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string head;
    if (!(ls >> head)) {
      flush();
      continue;
    }
    open = true;
    const std::string rest = line.substr(line.find(head) + head.size());
    const auto bad = [&] {
      return Error(ErrorCode::kIoError, path.string() + ":" + std::to_string(lineno) + ": bad line");
    };
    if (head == "gt") {
      const auto v = ParseNumbers(rest);
      if (v.size() != 9) throw bad();
      cur.h_gt = ParseHomography(v);
    } else if (head == "eval") {
      const auto v = ParseNumbers(rest);
      if (v.size() != 2) throw bad();
      cur.eval_points.push_back({v[0], v[1]});
    } else {
      const auto v = ParseNumbers(line);
      if (v.size() != 4 && v.size() != 5) throw bad();
      cur.set.Add({v[0], v[1]}, {v[2], v[3]}, v.size() == 5 ? v[4] : 1.0);
    }
  }
  flush();
  return out;
}

struct GradCheckArgs {
  int instances = 100;
  std::uint64_t seed = 0;
  double step = 2e-3;
  double tolerance = 1e-4;
  std::string input;
  std::string out;
};

int CmdGradCheck(const GradCheckArgs& a, const std::vector<std::string>& argv) {
  if (a.instances < 0) throw UsageError("--instances must be >= 0");
  if (!(a.step > 0)) throw UsageError("--step must be > 0");
  std::vector<GradCheckInstance> instances;
  if (!a.input.empty()) {
    instances = ReadGradCheckFile(a.input);
  } else {
    for (int i = 0; i < a.instances; ++i) {
      instances.push_back(MakeGradCheckInstance(DeriveSeed(a.seed, {static_cast<std::uint64_t>(i)})));
    }
  }
  Manifest m("gradcheck", argv);
  m.j["config"] = {{"instances", instances.size()}, {"step", a.step}, {"tolerance", a.tolerance},
                   {"input", a.input}};
  m.j["seeds"] = {{"seed", a.seed}};

  const auto t0 = Clock::now();
  double worst = 0.0;
  int checked = 0, skipped = 0;
  json rows = json::array();
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const GradCheckResult r = CheckGradients(instances[i], a.step);
    if (r.skipped) {
      ++skipped;
      std::cout << "instance " << i << ": skipped (" << r.reason << ")\n";
      rows.push_back({{"instance", i}, {"skipped", true}, {"reason", r.reason}});
      continue;
    }
    ++checked;
    worst = std::max(worst, r.max_rel_error());
    rows.push_back({{"instance", i}, {"skipped", false}, {"max_rel_error_h", r.max_rel_error_h},
                    {"max_rel_error_loss", r.max_rel_error_loss}});
  }
  m.Stage("check", SecondsSince(t0));
  const bool pass = worst <= a.tolerance;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "checked %d, skipped %d, max relative error %.3e (tolerance %.1e): %s\n",
                checked, skipped, worst, a.tolerance, pass ? "PASS" : "FAIL");
  std::cout << buf;
  if (!a.out.empty()) {
    json report = {{"checked", checked}, {"skipped", skipped}, {"max_rel_error", worst}, {"pass", pass},
                   {"instances", rows}};
    WriteFileAtomic(a.out, report.dump(2) + "\n");
    m.j["outputs"].push_back(a.out);
    m.WriteNextTo(a.out);
  }
  return pass ? kExitOk : kExitRuntime;
}

int Run(int argc, char** argv);

int CmdReplay(const std::string& manifest_path) {
  const json j = json::parse(ReadFile(manifest_path));
  std::vector<std::string> args = j.at("argv").get<std::vector<std::string>>();
  if (args.size() < 2 || args[1] == "replay") throw UsageError("manifest has no replayable command");
  std::vector<char*> ptrs;
  for (auto& s : args) ptrs.push_back(s.data());
  return Run(static_cast<int>(ptrs.size()), ptrs.data());
}

int Run(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  CLI::App app{"woftkit: weighted-flow homography tracking toolkit"};
  app.set_version_flag("--version", WOFTKIT_VERSION);
  app.require_subcommand(1);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Generate synthetic sequences");
  auto* src = synth->add_option("--src-dir", sa.src_dir, "Directory of source images");
  auto* proc = synth->add_flag("--procedural", sa.procedural, "Use procedural textures");
  src->excludes(proc);
  synth->add_option("--length", sa.length, "Frames per sequence")->capture_default_str();
  synth->add_option("--count", sa.count, "Number of sequences")->capture_default_str();
  synth->add_option("--corner-frac", sa.corner_frac, "Corner offset bound, fraction of the diagonal")
      ->check(CLI::Range(0.0, 0.5 - 1e-12))
      ->capture_default_str();
  synth->add_option("--blur-max", sa.blur_max, "Maximum motion blur length")->capture_default_str();
  synth->add_option("--quality", sa.quality, "Degradation quality 1..100")
      ->check(CLI::Range(1, 100))
      ->capture_default_str();
  synth->add_option("--seed", sa.seed)->capture_default_str();
  synth->add_option("--out", sa.out, "Output directory")->required();
  synth->add_option("--smoothness", sa.smoothness, "Corner acceleration std, pixels")->capture_default_str();
  synth->add_option("--width", sa.width)->check(CLI::PositiveNumber)->capture_default_str();
  synth->add_option("--height", sa.height)->check(CLI::PositiveNumber)->capture_default_str();
  synth->add_option("--codec", sa.codec, "External codec command with {in} {out} {quality}");
  synth->add_option("--jobs", sa.jobs, "Worker threads (default: WOFTKIT_JOBS or all cores)");

  TrackArgs ta;
  auto* track = app.add_subcommand("track", "Track the template of a sequence");
  track->add_option("--seq", ta.seq, "Sequence directory")->required();
  track->add_option("--out", ta.out, "Pose trace file")->required();
  track->add_option("--estimator", ta.estimator, "lsq|weighted_lsq|irls|ransac")->capture_default_str();
  track->add_option("--prewarp", ta.prewarp, "never|always|controlled")->capture_default_str();
  track->add_option("--weights", ta.weights, "fb|uniform")->capture_default_str();
  track->add_option("--fb-sigma", ta.fb_sigma)->capture_default_str();
  track->add_option("--inlier-thresh", ta.inlier_thresh)->capture_default_str();
  track->add_option("--lost-ratio", ta.lost_ratio)->capture_default_str();
  track->add_option("--max-lost", ta.max_lost)->capture_default_str();
  track->add_option("--max-corr", ta.max_corr)->capture_default_str();
  track->add_option("--downscale", ta.downscale)->capture_default_str();
  track->add_option("--flow", ta.flow, "synthetic|lk|file")->capture_default_str();
  track->add_option("--flow-dir", ta.flow_dir, "Directory of .flo files for --flow file");
  track->add_option("--flow-profile", ta.flow_profile, "clean|contaminated (synthetic flow)")
      ->capture_default_str();
  track->add_option("--seed", ta.seed)->capture_default_str();

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Score pose traces against ground truth");
  eval->add_option("--seq", ea.seqs, "Sequence directory (repeatable)")->required();
  eval->add_option("--trace", ea.traces, "Trace or pose file (one per --seq)")->required();
  eval->add_option("--thresholds", ea.thresholds)->capture_default_str();
  eval->add_option("--out", ea.out, "Directory for report.json and curve.csv");

  AblateArgs aa;
  auto* ablate = app.add_subcommand("ablate", "Estimator x pre-warp ablation on a synthetic suite");
  ablate->add_flag("--quick", aa.quick, "4 sequences of 151 frames");
  ablate->add_option("--sequences", aa.sequences);
  ablate->add_option("--length", aa.length);
  ablate->add_option("--suite", aa.suite, "clean|contaminated")->capture_default_str();
  ablate->add_option("--seed", aa.seed)->capture_default_str();
  ablate->add_option("--out", aa.out, "CSV path")->capture_default_str();
  ablate->add_option("--jobs", aa.jobs);

  GradCheckArgs ga;
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of the weight gradients");
  grad->add_option("--instances", ga.instances)->capture_default_str();
  grad->add_option("--seed", ga.seed)->capture_default_str();
  grad->add_option("--step", ga.step)->capture_default_str();
  grad->add_option("--tolerance", ga.tolerance)->capture_default_str();
  grad->add_option("--input", ga.input, "Instance file instead of random instances");
  grad->add_option("--out", ga.out, "JSON report");

  std::string manifest;
  auto* replay = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
  replay->add_option("manifest", manifest)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (*synth) return CmdSynth(sa, args);
  if (*track) return CmdTrack(ta, args);
  if (*eval) return CmdEval(ea, args);
  if (*ablate) return CmdAblate(aa, args);
  if (*grad) return CmdGradCheck(ga, args);
  return CmdReplay(manifest);
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return Run(argc, argv);
  } catch (const UsageError& e) {
    std::cerr << "woftkit: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "woftkit: " << e.what() << "\n";
    const bool usage = e.code() == ErrorCode::kInvalidArgument || e.code() == ErrorCode::kLengthMismatch;
    return usage ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "woftkit: " << e.what() << "\n";
    return kExitRuntime;
  }
}
