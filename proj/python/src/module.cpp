#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "dragkit/benchio.hpp"
#include "dragkit/engine.hpp"
#include "dragkit/error.hpp"
#include "dragkit/extractors.hpp"
#include "dragkit/geometry.hpp"
#include "dragkit/metrics.hpp"
#include "dragkit/point_drag.hpp"
#include "dragkit/region.hpp"
#include "dragkit/schedule.hpp"
#include "dragkit/synthetic.hpp"

namespace py = pybind11;
using namespace dragkit;

namespace {

using FieldArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using MaskArray = py::array_t<bool, py::array::c_style | py::array::forcecast>;
using Pair = std::pair<double, double>;

Point2 to_point(Pair p) { return {p.first, p.second}; }
Pair to_pair(Point2 p) { return {p.x, p.y}; }

// (C, H, W) float64 arrays; 2-D arrays are read as a single channel.
Field to_field(const FieldArray& a) {
    if (a.ndim() != 2 && a.ndim() != 3) throw InvalidArgument("expected a 2-D or 3-D array");
    const int c = a.ndim() == 3 ? static_cast<int>(a.shape(0)) : 1;
    const int h = static_cast<int>(a.shape(a.ndim() - 2));
    const int w = static_cast<int>(a.shape(a.ndim() - 1));
    return Field(c, h, w, std::vector<double>(a.data(), a.data() + a.size()));
}

py::array_t<double> to_array(const Field& f) {
    py::array_t<double> out({f.channels(), f.height(), f.width()});
    std::copy(f.values().begin(), f.values().end(), out.mutable_data());
    return out;
}

Mask2D to_mask(const MaskArray& a) {
    if (a.ndim() != 2) throw InvalidArgument("expected a 2-D boolean mask");
    const int h = static_cast<int>(a.shape(0));
    const int w = static_cast<int>(a.shape(1));
    Mask2D m(w, h);
    auto v = a.unchecked<2>();
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (v(y, x)) m.set(x, y);
    return m;
}

py::array_t<bool> to_array(const Mask2D& m) {
    py::array_t<bool> out({m.height(), m.width()});
    auto v = out.mutable_unchecked<2>();
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x) v(y, x) = m.at(x, y);
    return out;
}

TaskKind to_kind(const std::string& name) {
    const auto kind = parse_task_kind(name);
    if (!kind) throw InvalidArgument("unknown task '" + name + "'");
    return *kind;
}

py::dict result_dict(const DragResult& r) {
    std::vector<std::vector<Pair>> trajectory;
    for (const auto& per_op : r.centroid_trajectory) {
        auto& out = trajectory.emplace_back();
        std::transform(per_op.begin(), per_op.end(), std::back_inserter(out), to_pair);
    }
    py::dict d;
    d["final_z"] = to_array(r.final_z);
    d["loss_trajectory"] = r.loss_trajectory;
    d["centroid_trajectory"] = trajectory;
    d["iterations"] = r.iterations_run;
    d["gradient_mask"] = to_array(r.gradient_mask);
    d["gammas"] = r.gammas;
    return d;
}

py::dict report_dict(const MetricReport& r) {
    py::dict d;
    d["if_bg"] = r.if_bg;
    d["if_s2t"] = r.if_s2t;
    d["if_s2s"] = r.if_s2s;
    d["md1"] = r.md1;
    d["md2"] = r.md2;
    d["distance"] = r.distance;
    d["variant"] = r.variant;
    return d;
}

MdOptions md_options(int patch_radius, int scope_radius, int stride) {
    MdOptions o;
    o.patch_radius = patch_radius;
    o.scope_radius = scope_radius;
    o.stride = stride;
    return o;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Region-based drag editing on toy latents";

    auto base = py::register_exception<Error>(m, "DragkitError", PyExc_ValueError);
    py::register_exception<CancelledError>(m, "CancelledError", base.ptr());
    py::register_exception<NonFiniteLossError>(m, "NonFiniteLossError", base.ptr());

    // geometry
    m.def("disc_mask",
          [](int width, int height, Pair center, double radius) {
              return to_array(disc_mask(width, height, to_point(center), radius));
          },
          py::arg("width"), py::arg("height"), py::arg("center"), py::arg("radius"));
    m.def("centroid", [](const MaskArray& mask) { return to_pair(centroid(to_mask(mask))); });
    m.def("mask_iou", [](const MaskArray& a, const MaskArray& b) { return mask_iou(to_mask(a), to_mask(b)); });
    m.def("min_area_rect", [](const std::vector<Pair>& points) {
        std::vector<Point2> pts;
        std::transform(points.begin(), points.end(), std::back_inserter(pts), to_point);
        const RotatedRect r = min_area_rect(pts);
        py::dict d;
        d["center"] = to_pair(r.center);
        d["width"] = r.width;
        d["height"] = r.height;
        d["angle"] = r.angle_deg;
        std::vector<Pair> corners;
        for (const Point2& p : box_points(r)) corners.push_back(to_pair(p));
        d["corners"] = corners;
        return d;
    });

    // schedule
    py::class_<RegionOp>(m, "RegionOp")
        .def(py::init([](const std::string& task, const MaskArray& mask, Pair target,
                         std::optional<Pair> anchor) {
                 std::optional<Point2> a;
                 if (anchor) a = to_point(*anchor);
                 return RegionOp(to_kind(task), to_mask(mask), to_point(target), a);
             }),
             py::arg("task"), py::arg("mask"), py::arg("target"), py::arg("anchor") = py::none())
        .def_property_readonly("task", [](const RegionOp& op) { return std::string(to_string(op.kind())); })
        .def_property_readonly("mask", [](const RegionOp& op) { return to_array(op.source_mask()); })
        .def_property_readonly("target", [](const RegionOp& op) { return to_pair(op.target()); })
        .def_property_readonly("anchor",
                               [](const RegionOp& op) -> std::optional<Pair> {
                                   if (!op.anchor()) return std::nullopt;
                                   return to_pair(*op.anchor());
                               })
        .def_property_readonly("begin", [](const RegionOp& op) { return to_pair(op.begin()); })
        .def("__repr__", [](const RegionOp& op) {
            return "<RegionOp " + std::string(to_string(op.kind())) + " " +
                   std::to_string(op.source_mask().count()) + " cells>";
        });
    m.def("target_mask_at",
          [](const RegionOp& op, int k, int K) { return to_array(target_mask_at(op, k, K)); },
          py::arg("op"), py::arg("k"), py::arg("K"));
    m.def("transform_at",
          [](const RegionOp& op, int k, int K) {
              const AffineTransform t = transform_at(op, k, K);
              return std::vector<double>{t(0, 0), t(0, 1), t(0, 2), t(1, 0), t(1, 1), t(1, 2)};
          },
          py::arg("op"), py::arg("k"), py::arg("K"));

    // region
    m.def("region_weights", [](const std::vector<MaskArray>& masks) {
        std::vector<Mask2D> ms;
        for (const auto& a : masks) ms.push_back(to_mask(a));
        return region_weights(ms).gammas;
    });
    m.def("build_gradient_mask",
          [](const std::vector<RegionOp>& ops, int width, int height, int K, bool sweep) {
              GradientMaskOptions o;
              o.sweep = sweep;
              return to_array(build_gradient_mask(ops, width, height, K, o).mask);
          },
          py::arg("ops"), py::arg("width"), py::arg("height"), py::arg("K"), py::arg("sweep") = true);

    // engine
    py::class_<DragConfig>(m, "DragConfig")
        .def(py::init<>())
        .def_readwrite("k_motion", &DragConfig::k_motion)
        .def_readwrite("k_refine", &DragConfig::k_refine)
        .def_readwrite("lr_phase1", &DragConfig::lr_phase1)
        .def_readwrite("lr_phase2", &DragConfig::lr_phase2)
        .def_property(
            "loss_mode",
            [](const DragConfig& c) { return c.loss_mode == LossMode::L1 ? "l1" : "huber"; },
            [](DragConfig& c, const std::string& mode) {
                if (mode == "l1") {
                    c.loss_mode = LossMode::L1;
                } else if (mode == "huber") {
                    c.loss_mode = LossMode::Huber;
                } else {
                    throw InvalidArgument("loss_mode must be 'l1' or 'huber'");
                }
            })
        .def_readwrite("huber_delta", &DragConfig::huber_delta)
        .def_readwrite("align_source", &DragConfig::align_source)
        .def_readwrite("normalized_gradient", &DragConfig::normalized_gradient)
        .def_readwrite("toy_step", &DragConfig::toy_step)
        .def_readwrite("sweep", &DragConfig::sweep)
        .def_property(
            "extractor", [](const DragConfig& c) { return c.extractor.kind; },
            [](DragConfig& c, const std::string& kind) { c.extractor.kind = kind; })
        .def_property(
            "extractor_sigma", [](const DragConfig& c) { return c.extractor.sigma; },
            [](DragConfig& c, double s) { c.extractor.sigma = s; })
        .def_property(
            "extractor_stride", [](const DragConfig& c) { return c.extractor.stride; },
            [](DragConfig& c, int s) { c.extractor.stride = s; })
        .def_property_readonly("total_iterations", &DragConfig::total_iterations)
        .def("validate", &DragConfig::validate);

    m.def("run_drag",
          [](const FieldArray& z0, const std::vector<RegionOp>& ops, const DragConfig& config) {
              const Field z = to_field(z0);
              DragResult r;
              {
                  py::gil_scoped_release release;
                  r = run_drag(z, ops, config);
              }
              return result_dict(r);
          },
          py::arg("z0"), py::arg("ops"), py::arg("config") = DragConfig{});

    m.def("run_point_drag",
          [](const FieldArray& z0, const std::vector<std::pair<Pair, Pair>>& points, const MaskArray& B,
             const DragConfig& config, int patch_radius, int track_radius) {
              const Field z = to_field(z0);
              std::vector<PointOp> ops;
              for (const auto& [handle, target] : points) {
                  ops.push_back({to_point(handle), to_point(target), patch_radius, track_radius});
              }
              const GradientMask mask{to_mask(B)};
              const auto extractor = make_extractor(config.extractor);
              DragResult r;
              {
                  py::gil_scoped_release release;
                  r = run_point_drag(z, ops, mask, config, PointDragConfig{}, *extractor);
              }
              return result_dict(r);
          },
          py::arg("z0"), py::arg("points"), py::arg("gradient_mask"), py::arg("config") = DragConfig{},
          py::arg("patch_radius") = 1, py::arg("track_radius") = 3);

    // metrics
    m.def("md1",
          [](const FieldArray& x, const FieldArray& xe, const RegionOp& op, const MaskArray& search,
             int patch_radius, int scope_radius, int stride) {
              return md1(to_field(x), to_field(xe), op, to_mask(search),
                         md_options(patch_radius, scope_radius, stride));
          },
          py::arg("x"), py::arg("x_edited"), py::arg("op"), py::arg("search_mask"), py::arg("patch_radius") = 3,
          py::arg("scope_radius") = 5, py::arg("stride") = 1);
    m.def("md2",
          [](const FieldArray& x, const FieldArray& xe, const RegionOp& op, const MaskArray& search,
             int patch_radius, int scope_radius, int stride) {
              return md2(to_field(x), to_field(xe), op, to_mask(search),
                         md_options(patch_radius, scope_radius, stride));
          },
          py::arg("x"), py::arg("x_edited"), py::arg("op"), py::arg("search_mask"), py::arg("patch_radius") = 3,
          py::arg("scope_radius") = 5, py::arg("stride") = 1);
    m.def("evaluate_edit",
          [](const FieldArray& x, const FieldArray& xe, const std::vector<RegionOp>& ops, const MaskArray& B, int K,
             const std::string& distance) {
              EvalOptions o;
              o.distance = distance;
              return report_dict(evaluate_edit(to_field(x), to_field(xe), ops, to_mask(B), K, o));
          },
          py::arg("x"), py::arg("x_edited"), py::arg("ops"), py::arg("gradient_mask"), py::arg("K"),
          py::arg("distance") = "ssim");

    // toy data and benchmark files
    m.def("synthetic_suite", [](std::uint64_t seed) {
        SyntheticOptions o;
        o.seed = seed;
        py::list out;
        for (const SyntheticCase& c : synthetic_suite(o)) {
            py::dict d;
            d["name"] = c.name;
            d["z0"] = to_array(c.z0);
            d["op"] = c.op;
            d["handle"] = to_pair(c.point.handle);
            d["point_target"] = to_pair(c.point.target);
            out.append(d);
        }
        return out;
    }, py::arg("seed") = SyntheticOptions{}.seed);

    m.def("validate_dataset", [](const std::filesystem::path& dir) {
        const DatasetReport rep = validate_dataset(dir);
        py::list samples;
        for (const SampleReport& s : rep.samples) {
            py::dict d;
            d["name"] = s.name;
            d["passed"] = s.passed;
            d["reasons"] = s.reasons;
            samples.append(d);
        }
        py::dict d;
        d["passed"] = rep.passed();
        d["failed"] = rep.failed();
        d["samples"] = samples;
        return d;
    });
}
