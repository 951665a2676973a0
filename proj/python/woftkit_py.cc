#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "woftkit/autodiff.h"
#include "woftkit/error.h"
#include "woftkit/estimators.h"
#include "woftkit/eval.h"
#include "woftkit/experiments.h"
#include "woftkit/flow.h"
#include "woftkit/geometry.h"
#include "woftkit/image.h"
#include "woftkit/io.h"
#include "woftkit/sequence.h"
#include "woftkit/synth.h"
#include "woftkit/tracker.h"

namespace py = pybind11;
using namespace woftkit;

namespace {

using Points = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;
using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Homography ToH(const Matrix3& m) { return Homography::FromMatrix(m); }

CorrespondenceSet MakeSet(const Points& src, const Points& dst, const std::optional<Eigen::VectorXd>& w) {
  if (src.rows() != dst.rows()) throw Error(ErrorCode::kInvalidArgument, "src and dst differ in length");
  CorrespondenceSet c;
  for (Eigen::Index i = 0; i < src.rows(); ++i) {
    const Point2 p{src(i, 0), src(i, 1)}, q{dst(i, 0), dst(i, 1)};
    if (w) {
      if (w->size() != src.rows()) throw Error(ErrorCode::kInvalidArgument, "one weight per pair");
      c.Add(p, q, (*w)(i));
    } else {
      c.Add(p, q);
    }
  }
  return c;
}

py::dict ReportDict(const EstimatorReport& r) {
  py::dict d;
  d["homography"] = r.homography.matrix();
  d["inlier_ratio"] = r.inlier_ratio;
  d["inliers"] = r.inlier_mask;
  d["residuals"] = r.residuals;
  d["iterations"] = r.iterations;
  d["hypotheses"] = r.hypotheses;
  return d;
}

// H x W (x C) float32 array <-> ImageBuffer.
ImageBuffer ToImage(const FloatArray& a) {
  if (a.ndim() != 2 && a.ndim() != 3) throw Error(ErrorCode::kInvalidArgument, "image must be HxW or HxWxC");
  const int h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
  const int c = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
  return ImageBuffer(w, h, c, std::vector<float>(a.data(), a.data() + a.size()));
}

FloatArray FromImage(const ImageBuffer& img) {
  std::vector<py::ssize_t> shape = {img.height(), img.width()};
  if (img.channels() > 1) shape.push_back(img.channels());
  FloatArray out(shape);
  std::copy(img.pixels().begin(), img.pixels().end(), out.mutable_data());
  return out;
}

Mask ToMask(const py::array_t<bool, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw Error(ErrorCode::kInvalidArgument, "mask must be HxW");
  Mask m(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  for (py::ssize_t i = 0; i < a.size(); ++i) m.data[i] = a.data()[i] ? 1 : 0;
  return m;
}

py::array_t<bool> FromMask(const Mask& m) {
  py::array_t<bool> out({m.height, m.width});
  for (std::size_t i = 0; i < m.data.size(); ++i) out.mutable_data()[i] = m.data[i] != 0;
  return out;
}

py::dict SequenceDict(const SequenceRecord& s) {
  py::dict d;
  d["name"] = s.name;
  py::list frames, poses;
  for (const auto& f : s.frames) frames.append(FromImage(f));
  for (const auto& h : s.gt_poses) poses.append(h.matrix());
  d["frames"] = frames;
  d["gt_poses"] = poses;
  d["mask"] = FromMask(s.template_mask);
  return d;
}

py::dict ResultDict(const FrameResult& r) {
  py::dict d;
  d["frame"] = r.frame_index;
  d["pose"] = r.pose.matrix();
  d["status"] = ToString(r.status);
  d["inlier_ratio"] = r.inlier_ratio;
  d["used_local_fallback"] = r.used_local_fallback;
  return d;
}

TrackerConfig MakeConfig(const std::string& estimator, const std::string& prewarp, double inlier_threshold,
                         double lost_ratio, int max_lost, std::size_t max_corr, int downscale,
                         std::uint64_t seed) {
  TrackerConfig c;
  c.estimator = ParseEstimator(estimator);
  c.pre_warp_mode = ParsePreWarpMode(prewarp);
  c.inlier_threshold = inlier_threshold;
  c.lost_ratio = lost_ratio;
  c.max_lost_frames = max_lost;
  c.max_correspondences = max_corr;
  c.downscale_factor = downscale;
  c.rng_seed = seed;
  c.Validate();
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "woftkit core bindings";

  static py::exception<Error> exc(m, "WoftkitError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kInvalidArgument) {
        PyErr_SetString(PyExc_ValueError, e.what());
      } else {
        py::set_error(exc, e.what());
      }
    }
  });

  // geometry
  m.def("warp_point", [](const Matrix3& h, double x, double y) {
    const Point2 p = WarpPoint(ToH(h), {x, y});
    return std::make_pair(p.x, p.y);
  });
  m.def("compose", [](const Matrix3& a, const Matrix3& b) { return Compose(ToH(a), ToH(b)).matrix(); },
        "Homography a after b.");
  m.def("invert", [](const Matrix3& h) { return Invert(ToH(h)).matrix(); });
  m.def("canonical", [](const Matrix3& h) { return ToH(h).matrix(); });
  m.def("four_point_homography", [](const Points& src, const Points& dst) {
    if (src.rows() != 4 || dst.rows() != 4) throw Error(ErrorCode::kInvalidArgument, "need 4 points each");
    std::array<Point2, 4> s, d;
    for (int i = 0; i < 4; ++i) {
      s[i] = {src(i, 0), src(i, 1)};
      d[i] = {dst(i, 0), dst(i, 1)};
    }
    return FourPointHomography(s, d).matrix();
  });

  // estimators
  m.def("solve_lsq", [](const Points& src, const Points& dst, double threshold) {
    return ReportDict(SolveLsq(MakeSet(src, dst, std::nullopt), Conditioning::kHartley, threshold));
  }, py::arg("src"), py::arg("dst"), py::arg("threshold") = kDefaultInlierThreshold);
  m.def("solve_weighted_lsq", [](const Points& src, const Points& dst, const Eigen::VectorXd& w, double threshold) {
    return ReportDict(SolveWeightedLsq(MakeSet(src, dst, w), Conditioning::kHartley, threshold));
  }, py::arg("src"), py::arg("dst"), py::arg("weights"), py::arg("threshold") = kDefaultInlierThreshold);
  m.def("solve_irls_huber",
        [](const Points& src, const Points& dst, std::optional<Eigen::VectorXd> w, double delta, int max_iters) {
          IrlsOptions o;
          o.delta = delta;
          o.max_iters = max_iters;
          return ReportDict(SolveIrlsHuber(MakeSet(src, dst, w), o));
        },
        py::arg("src"), py::arg("dst"), py::arg("weights") = std::nullopt, py::arg("delta") = 5.0,
        py::arg("max_iters") = 20);
  m.def("solve_ransac",
        [](const Points& src, const Points& dst, double threshold, int max_hypotheses, std::uint64_t seed) {
          RansacOptions o;
          o.threshold = threshold;
          o.max_hypotheses = max_hypotheses;
          o.seed = seed;
          return ReportDict(SolveRansac(MakeSet(src, dst, std::nullopt), o));
        },
        py::arg("src"), py::arg("dst"), py::arg("threshold") = 5.0, py::arg("max_hypotheses") = 1000,
        py::arg("seed") = 0);

  // autodiff
  m.def("grad_solution_wrt_weights", [](const Points& src, const Points& dst, const Eigen::VectorXd& w) {
    const SolveGradients g = GradSolutionWrtWeights(MakeSet(src, dst, w));
    return std::make_pair(Eigen::Matrix3d(g.homography.matrix()), Eigen::MatrixXd(g.d_h_d_w));
  }, "Returns (H, dH/dw) with dH/dw of shape 8 x N.");
  m.def("grad_loss_wrt_weights",
        [](const Points& src, const Points& dst, const Eigen::VectorXd& w, const Matrix3& h_gt,
           const Points& eval_points) {
          std::vector<Point2> pts;
          for (Eigen::Index i = 0; i < eval_points.rows(); ++i) pts.push_back({eval_points(i, 0), eval_points(i, 1)});
          const SolveGradients g = GradLossWrtWeights(MakeSet(src, dst, w), ToH(h_gt), pts);
          return std::make_pair(g.loss, Eigen::VectorXd(g.d_loss_d_w));
        },
        "Returns (loss, dL/dw).");
  m.def("gradcheck", [](int instances, std::uint64_t seed, double step) {
    double worst = 0.0;
    int skipped = 0;
    for (int i = 0; i < instances; ++i) {
      const auto r = CheckGradients(MakeGradCheckInstance(DeriveSeed(seed, {static_cast<std::uint64_t>(i)})), step);
      if (r.skipped) ++skipped;
      else worst = std::max(worst, r.max_rel_error());
    }
    py::dict d;
    d["max_rel_error"] = worst;
    d["skipped"] = skipped;
    return d;
  }, py::arg("instances") = 100, py::arg("seed") = 0, py::arg("step") = 2e-3);

  // eval
  m.def("alignment_error", [](const Matrix3& h, const Matrix3& h_star, const Points& ref) {
    if (ref.rows() != 4) throw Error(ErrorCode::kInvalidArgument, "need 4 reference points");
    std::array<Point2, 4> r;
    for (int i = 0; i < 4; ++i) r[i] = {ref(i, 0), ref(i, 1)};
    return AlignmentError(ToH(h), ToH(h_star), r);
  });
  m.def("reprojection_loss", [](const Matrix3& h, const Matrix3& h_gt, const Points& pts) {
    std::vector<Point2> p;
    for (Eigen::Index i = 0; i < pts.rows(); ++i) p.push_back({pts(i, 0), pts(i, 1)});
    return ReprojectionLoss(ToH(h), ToH(h_gt), p);
  });
  m.def("precision_at", [](const std::vector<double>& errors, const std::vector<double>& thresholds) {
    return PrecisionAt(std::span<const double>(errors), thresholds);
  }, py::arg("errors"), py::arg("thresholds") = std::vector<double>{5.0, 15.0});

  // images and synthesis
  m.def("procedural_texture", [](int w, int h, std::uint64_t seed, int channels, const std::string& kind) {
    TextureKind k = TextureKind::kSmooth;
    if (kind == "natural") k = TextureKind::kNatural;
    else if (kind != "smooth") throw Error(ErrorCode::kInvalidArgument, "kind must be smooth or natural");
    return FromImage(ProceduralTexture(w, h, seed, channels, k));
  }, py::arg("width"), py::arg("height"), py::arg("seed") = 0, py::arg("channels") = 1,
     py::arg("kind") = "smooth");
  m.def("warp_image", [](const Matrix3& h, const FloatArray& img, int w, int hgt) {
    const WarpedImage r = WarpImage(ToH(h), ToImage(img), w, hgt);
    return std::make_pair(FromImage(r.image), FromMask(r.valid));
  });
  m.def("degrade", [](const FloatArray& img, int quality) { return FromImage(Degrade(ToImage(img), quality)); });
  m.def("psnr", [](const FloatArray& a, const FloatArray& b) { return Psnr(ToImage(a), ToImage(b)); });
  m.def("random_homography", [](int w, int h, double frac, std::uint64_t seed) {
    Rng rng(seed);
    return RandomHomography(w, h, frac, rng).matrix();
  }, py::arg("width"), py::arg("height"), py::arg("frac") = 0.2, py::arg("seed") = 0);
  m.def("make_pair", [](const FloatArray& src, double corner_frac, double blur_max, int quality, std::uint64_t seed) {
    PairSpec s;
    s.corner_perturbation_frac = corner_frac;
    s.blur_max_len = blur_max;
    s.degrade_quality = quality;
    s.rng_seed = seed;
    const PairSample p = MakePair(ToImage(src), s);
    py::dict d;
    d["first"] = FromImage(p.first);
    d["second"] = FromImage(p.second);
    d["gt"] = p.gt.matrix();
    return d;
  }, py::arg("src"), py::arg("corner_frac") = 0.2, py::arg("blur_max") = 20.0, py::arg("quality") = 25,
     py::arg("seed") = 0);
  m.def("suite_sequence", [](int index, int length, int width, int height, std::uint64_t seed) {
    SuiteSpec s = CleanSuite(seed);
    s.length = length;
    s.width = width;
    s.height = height;
    return SequenceDict(BuildSuiteSequence(s, index).record);
  }, py::arg("index") = 0, py::arg("length") = 501, py::arg("width") = 320, py::arg("height") = 240,
     py::arg("seed") = 1);
  m.def("read_sequence", [](const std::filesystem::path& dir) { return SequenceDict(ReadSequence(dir)); });

  // tracking
  m.def("track_synthetic",
        [](const std::vector<FloatArray>& frames, const std::vector<Matrix3>& gt_poses,
           const py::array_t<bool, py::array::c_style | py::array::forcecast>& mask, const std::string& estimator,
           const std::string& prewarp, const std::string& weights, const std::string& profile,
           double inlier_threshold, double lost_ratio, int max_lost, std::size_t max_corr, int downscale,
           std::uint64_t seed) {
          const TrackerConfig cfg =
              MakeConfig(estimator, prewarp, inlier_threshold, lost_ratio, max_lost, max_corr, downscale, seed);
          std::vector<ImageBuffer> imgs;
          for (const auto& f : frames) imgs.push_back(ToImage(f));
          std::vector<Homography> gt;
          for (const auto& h : gt_poses) gt.push_back(ToH(h));
          SuiteSpec suite;
          suite.length = static_cast<int>(imgs.size());
          suite.seed = seed;
          FlowProfile fp;
          if (profile == "contaminated") fp = ContaminatedFlow();
          else if (profile != "clean") throw Error(ErrorCode::kInvalidArgument, "profile must be clean or contaminated");
          const SyntheticFlowProvider flow(gt, SuiteFlowOptions(suite, fp, 0));
          std::unique_ptr<WeightProvider> w;
          if (weights == "fb") w = std::make_unique<FbConsistencyWeightProvider>();
          else if (weights == "uniform") w = std::make_unique<UniformWeightProvider>();
          else throw Error(ErrorCode::kInvalidArgument, "weights must be fb or uniform");
          std::vector<FrameResult> res;
          {
            py::gil_scoped_release release;
            res = TrackFrames(imgs, ToMask(mask), cfg, flow, *w);
          }
          py::list out;
          for (const auto& r : res) out.append(ResultDict(r));
          return out;
        },
        py::arg("frames"), py::arg("gt_poses"), py::arg("mask"), py::arg("estimator") = "weighted_lsq",
        py::arg("prewarp") = "controlled", py::arg("weights") = "fb", py::arg("profile") = "clean",
        py::arg("inlier_threshold") = 5.0, py::arg("lost_ratio") = 0.2, py::arg("max_lost") = 10,
        py::arg("max_corr") = 500, py::arg("downscale") = 1, py::arg("seed") = 0);
  m.def("evaluate", [](const std::vector<Matrix3>& poses, const std::vector<Matrix3>& gt_poses,
                       const py::array_t<bool, py::array::c_style | py::array::forcecast>& mask,
                       const std::vector<double>& thresholds) {
    SequenceRecord seq;
    seq.template_mask = ToMask(mask);
    for (const auto& h : gt_poses) seq.gt_poses.push_back(ToH(h));
    std::vector<Homography> p;
    for (const auto& h : poses) p.push_back(ToH(h));
    const EvalReport r = EvaluateSequence(seq, p, thresholds);
    py::dict d;
    d["precision"] = r.p_at;
    std::vector<std::optional<double>> e = r.per_frame_e_al;
    d["errors"] = e;
    return d;
  }, py::arg("poses"), py::arg("gt_poses"), py::arg("mask"), py::arg("thresholds") = std::vector<double>{5.0, 15.0});
}
