// Copyright 2026 The vtlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "vtlm/common.hpp"
#include "vtlm/dataset.hpp"
#include "vtlm/image.hpp"
#include "vtlm/landmarks.hpp"
#include "vtlm/random.hpp"

namespace vtlm {

// Procedural midsagittal-like scenes. Each subject gets a morphology vector
// (head size, position, outline shape, fixed per-landmark offsets) and each
// articulation a pose vector (jaw, tongue, lips, velum) shared across
// subjects, mirroring the subject/class structure of the source corpus.
// Landmarks are computed analytically from those parameters and the image
// strokes are drawn through them, so ground truth is exact by construction.
struct SynthConfig {
  int n_subjects = 9;
  int n_articulations = 62;
  int height = 256;
  int width = 256;
  std::uint64_t seed = 0;
  double morph_amplitude = 1.0;   // inter-subject variation scale
  double artic_amplitude = 1.0;   // intra-subject (pose) variation scale
  int retry_limit = 100;

  void validate() const {
    if (n_subjects <= 0 || n_articulations <= 0)
      throw ConfigError("subject and articulation counts must be positive");
    if (height < 32 || width < 32)
      throw ConfigError("synthetic images must be at least 32x32");
    if (morph_amplitude < 0 || artic_amplitude < 0)
      throw ConfigError("variation amplitudes must be non-negative");
    if (retry_limit < 1) throw ConfigError("retry limit must be at least 1");
  }
};

namespace synth_detail {

// Normalized template positions in canonical landmark order, head facing
// left (x = column fraction, y = row fraction).
inline const std::array<Point, 21>& base_template() {
  static const std::array<Point, 21> base = {{
      {0.22, 0.42},  // ANS
      {0.60, 0.66},  // EG
      {0.66, 0.42},  // ET
      {0.62, 0.76},  // LC
      {0.17, 0.64},  // LLSV
      {0.18, 0.60},  // LLV
      {0.25, 0.58},  // LT
      {0.30, 0.18},  // N
      {0.26, 0.30},  // NM
      {0.58, 0.38},  // NP
      {0.62, 0.48},  // NPX
      {0.38, 0.46},  // PL
      {0.50, 0.44},  // PNS
      {0.55, 0.58},  // TE
      {0.34, 0.68},  // TJ
      {0.42, 0.52},  // TS
      {0.30, 0.56},  // TT
      {0.17, 0.46},  // ULPV
      {0.18, 0.50},  // ULV
      {0.24, 0.50},  // UT
      {0.56, 0.52},  // VT
  }};
  return base;
}

// Landmarks riding on the skull rather than on articulators move little
// between articulations.
inline bool is_skull_landmark(int idx) {
  switch (idx) {
    case 0:   // ANS
    case 2:   // ET
    case 7:   // N
    case 8:   // NM
    case 9:   // NP
    case 10:  // NPX
    case 11:  // PL
    case 12:  // PNS
    case 19:  // UT
      return true;
    default:
      return false;
  }
}

struct Morphology {
  double cx = 0.45, cy = 0.47;
  double scale_x = 1.0, scale_y = 1.0;
  std::array<Point, 21> offsets{};
  // head outline shape: r(theta) = r0 * (1 + a2 cos(2t+p2) + a3 cos(3t+p3))
  double outline_a2 = 0.0, outline_p2 = 0.0;
  double outline_a3 = 0.0, outline_p3 = 0.0;
};

struct Pose {
  double jaw = 0.0;
  double tongue_x = 0.0, tongue_y = 0.0;
  double lip = 0.0;
  double velum = 0.0;
  std::array<Point, 21> jitter{};
};

inline Morphology draw_morphology(Rng& rng, double amp) {
  Morphology m;
  m.cx = 0.45 + 0.020 * amp * rng.uniform(-1.0, 1.0);
  m.cy = 0.47 + 0.020 * amp * rng.uniform(-1.0, 1.0);
  m.scale_x = 1.0 + 0.080 * amp * rng.uniform(-1.0, 1.0);
  m.scale_y = 1.0 + 0.080 * amp * rng.uniform(-1.0, 1.0);
  for (auto& o : m.offsets) {
    o.x = 0.018 * amp * rng.uniform(-1.0, 1.0);
    o.y = 0.018 * amp * rng.uniform(-1.0, 1.0);
  }
  m.outline_a2 = 0.05 * rng.uniform(-1.0, 1.0);
  m.outline_p2 = rng.uniform(0.0, 6.283185307179586);
  m.outline_a3 = 0.04 * rng.uniform(-1.0, 1.0);
  m.outline_p3 = rng.uniform(0.0, 6.283185307179586);
  return m;
}

inline Pose draw_pose(Rng& rng, double amp) {
  Pose p;
  p.jaw = amp * rng.uniform(-1.0, 1.0);
  p.tongue_x = amp * rng.uniform(-1.0, 1.0);
  p.tongue_y = amp * rng.uniform(-1.0, 1.0);
  p.lip = amp * rng.uniform(-1.0, 1.0);
  p.velum = amp * rng.uniform(-1.0, 1.0);
  for (std::size_t i = 0; i < p.jitter.size(); ++i) {
    const double f = is_skull_landmark(static_cast<int>(i)) ? 0.3 : 1.0;
    p.jitter[i].x = 0.006 * amp * f * rng.uniform(-1.0, 1.0);
    p.jitter[i].y = 0.006 * amp * f * rng.uniform(-1.0, 1.0);
  }
  return p;
}

// Applies morphology then pose to the template; result stays normalized.
inline std::array<Point, 21> place_landmarks(const Morphology& m, const Pose& p) {
  const auto& base = base_template();
  const double bx = 0.42, by = 0.50;  // template centroid, roughly
  std::array<Point, 21> pts;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    pts[i].x = m.cx + (base[i].x - bx) * m.scale_x + m.offsets[i].x;
    pts[i].y = m.cy + (base[i].y - by) * m.scale_y + m.offsets[i].y;
  }
  auto shift = [&pts](int idx, double dx, double dy) {
    pts[static_cast<std::size_t>(idx)].x += dx;
    pts[static_cast<std::size_t>(idx)].y += dy;
  };
  // jaw opening carries the lower jaw, lower lip and tongue floor
  for (int idx : {6, 5, 4, 14}) shift(idx, 0.008 * p.jaw, 0.045 * p.jaw);
  shift(1, 0.0, 0.020 * p.jaw);   // EG
  shift(3, 0.0, 0.015 * p.jaw);   // LC
  // tongue body
  for (int idx : {16, 15, 13}) shift(idx, 0.035 * p.tongue_x, 0.035 * p.tongue_y);
  shift(15, 0.0, 0.015 * p.tongue_y);  // extra hump on TS
  shift(14, 0.020 * p.tongue_x, 0.0);  // TJ follows the root
  // lip protrusion and aperture
  for (int idx : {18, 17, 5, 4}) shift(idx, -0.018 * p.lip, 0.0);
  shift(18, 0.0, -0.008 * p.lip);
  shift(5, 0.0, 0.008 * p.lip);
  // velum
  shift(20, 0.020 * p.velum, 0.025 * p.velum);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    pts[i].x += p.jitter[i].x;
    pts[i].y += p.jitter[i].y;
  }
  return pts;
}

// --- rendering ------------------------------------------------------------

struct Canvas {
  int h, w;
  std::vector<float> v;
  Canvas(int hh, int ww) : h(hh), w(ww), v(static_cast<std::size_t>(hh) * ww, 0.05f) {}
  float& at(int y, int x) { return v[static_cast<std::size_t>(y) * w + x]; }
};

// Soft-edged line segment; pixels keep the max of their current value and
// the stroke's falloff so crossings do not bloom.
inline void stroke(Canvas& c, double x0, double y0, double x1, double y1,
                   double radius, double feather, float intensity) {
  const int ymin = std::max(0, static_cast<int>(std::floor(std::min(y0, y1) - radius - feather)));
  const int ymax = std::min(c.h - 1, static_cast<int>(std::ceil(std::max(y0, y1) + radius + feather)));
  const int xmin = std::max(0, static_cast<int>(std::floor(std::min(x0, x1) - radius - feather)));
  const int xmax = std::min(c.w - 1, static_cast<int>(std::ceil(std::max(x0, x1) + radius + feather)));
  const double vx = x1 - x0, vy = y1 - y0;
  const double len2 = vx * vx + vy * vy;
  for (int y = ymin; y <= ymax; ++y) {
    for (int x = xmin; x <= xmax; ++x) {
      double t = len2 > 0 ? ((x - x0) * vx + (y - y0) * vy) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      const double dx = x - (x0 + t * vx), dy = y - (y0 + t * vy);
      const double d = std::sqrt(dx * dx + dy * dy);
      const double fall = std::clamp((radius + feather - d) / feather, 0.0, 1.0);
      if (fall > 0) {
        float& px = c.at(y, x);
        px = std::max(px, static_cast<float>(intensity * fall));
      }
    }
  }
}

inline void chain(Canvas& c, const std::vector<Point>& pts, double radius,
                  double feather, float intensity) {
  for (std::size_t i = 0; i + 1 < pts.size(); ++i)
    stroke(c, pts[i].x, pts[i].y, pts[i + 1].x, pts[i + 1].y, radius, feather,
           intensity);
}

inline void blob(Canvas& c, double cx, double cy, double radius, float intensity) {
  stroke(c, cx, cy, cx, cy, radius * 0.4, radius, intensity);
}

}  // namespace synth_detail

inline Corpus generate_synthetic(const SynthConfig& config) {
  using namespace synth_detail;
  config.validate();
  const int h = config.height, w = config.width;

  std::vector<Morphology> morphs(static_cast<std::size_t>(config.n_subjects));
  for (int s = 0; s < config.n_subjects; ++s) {
    Rng rng(derive_seed(config.seed, 1, static_cast<std::uint64_t>(s)));
    morphs[static_cast<std::size_t>(s)] = draw_morphology(rng, config.morph_amplitude);
  }
  std::vector<Pose> poses(static_cast<std::size_t>(config.n_articulations));
  for (int a = 0; a < config.n_articulations; ++a) {
    Rng rng(derive_seed(config.seed, 2, static_cast<std::uint64_t>(a)));
    poses[static_cast<std::size_t>(a)] = draw_pose(rng, config.artic_amplitude);
  }

  auto in_frame = [&](const std::array<Point, 21>& pts) {
    for (const Point& p : pts)
      if (!(p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0)) return false;
    return true;
  };

  auto tag = [](char prefix, int n) {
    std::string t(1, prefix);
    if (n < 10) t += '0';
    t += std::to_string(n);
    return t;
  };

  Corpus corpus;
  corpus.pixel_to_cm = 0.1;
  for (int s = 0; s < config.n_subjects; ++s) {
    const Morphology& m = morphs[static_cast<std::size_t>(s)];
    for (int a = 0; a < config.n_articulations; ++a) {
      Pose pose = poses[static_cast<std::size_t>(a)];
      std::array<Point, 21> norm = place_landmarks(m, pose);
      for (int retry = 1; !in_frame(norm); ++retry) {
        if (retry > config.retry_limit)
          throw ConfigError("synthetic landmarks keep leaving the frame for subject " +
                            std::to_string(s + 1) + ", articulation " +
                            std::to_string(a + 1) + "; lower the amplitudes");
        Rng rng(derive_seed(config.seed, 4,
                            (static_cast<std::uint64_t>(a) << 20) ^
                                (static_cast<std::uint64_t>(s) << 40) ^
                                static_cast<std::uint64_t>(retry)));
        pose = draw_pose(rng, config.artic_amplitude);
        norm = place_landmarks(m, pose);
      }

      Sample sample;
      sample.subject = tag('s', s + 1);
      sample.articulation = tag('a', a + 1);

      // pixel coordinates; (0,0) is the top-left pixel center
      std::array<Point, 21> px;
      for (std::size_t i = 0; i < px.size(); ++i) {
        px[i].x = norm[i].x * (w - 1);
        px[i].y = norm[i].y * (h - 1);
      }

      const double unit = std::min(w, h);
      Canvas canvas(h, w);
      auto P = [&](int idx) { return px[static_cast<std::size_t>(idx)]; };

      // head outline around the morphology center
      {
        std::vector<Point> ring;
        const double rx = 0.36 * m.scale_x * (w - 1);
        const double ry = 0.40 * m.scale_y * (h - 1);
        const double ox = m.cx * (w - 1), oy = (m.cy - 0.02) * (h - 1);
        for (int k = 0; k <= 40; ++k) {
          const double t = 2.0 * 3.141592653589793 * k / 40.0;
          const double mod = 1.0 + m.outline_a2 * std::cos(2 * t + m.outline_p2) +
                             m.outline_a3 * std::cos(3 * t + m.outline_p3);
          ring.push_back({ox + rx * mod * std::cos(t), oy + ry * mod * std::sin(t)});
        }
        chain(canvas, ring, 0.010 * unit, 0.012 * unit, 0.80f);
      }
      // brain mass
      blob(canvas, m.cx * (w - 1), (m.cy - 0.18) * (h - 1), 0.16 * unit, 0.35f);
      // nasal profile and hard palate
      chain(canvas, {P(7), P(8), P(0)}, 0.006 * unit, 0.010 * unit, 0.70f);
      chain(canvas, {P(0), P(11), P(12)}, 0.006 * unit, 0.010 * unit, 0.75f);
      // soft palate / velum and nasopharynx wall
      chain(canvas, {P(12), P(20)}, 0.007 * unit, 0.010 * unit, 0.65f);
      chain(canvas, {P(9), P(10), P(2)}, 0.006 * unit, 0.010 * unit, 0.60f);
      // rear pharynx wall down to the larynx
      chain(canvas, {P(2), P(1), P(3)}, 0.007 * unit, 0.012 * unit, 0.55f);
      // tongue body: blobs along tip -> dorsum -> root -> floor
      {
        const std::vector<Point> spine = {P(16), P(15), P(13), P(14)};
        for (std::size_t i = 0; i + 1 < spine.size(); ++i) {
          for (int k = 0; k < 4; ++k) {
            const double t = k / 4.0;
            const double cx = spine[i].x + t * (spine[i + 1].x - spine[i].x);
            const double cy = spine[i].y + t * (spine[i + 1].y - spine[i].y);
            blob(canvas, cx, cy, 0.045 * unit, 0.55f);
          }
        }
        chain(canvas, spine, 0.006 * unit, 0.010 * unit, 0.70f);
      }
      // lips and teeth
      blob(canvas, P(18).x, P(18).y, 0.020 * unit, 0.70f);
      blob(canvas, P(17).x, P(17).y, 0.016 * unit, 0.62f);
      blob(canvas, P(5).x, P(5).y, 0.020 * unit, 0.70f);
      blob(canvas, P(4).x, P(4).y, 0.016 * unit, 0.62f);
      blob(canvas, P(19).x, P(19).y, 0.010 * unit, 0.92f);
      blob(canvas, P(6).x, P(6).y, 0.010 * unit, 0.92f);
      // faint distinct marker at every landmark so each one has local
      // structure to latch onto
      for (int i = 0; i < kLandmarkCount; ++i)
        blob(canvas, P(i).x, P(i).y, 0.008 * unit,
             0.45f + 0.02f * static_cast<float>(i));

      Rng noise(derive_seed(config.seed, 3,
                            (static_cast<std::uint64_t>(s) << 32) ^
                                static_cast<std::uint64_t>(a)));
      sample.image = Image(h, w);
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          double v = canvas.at(y, x) + noise.uniform(-0.02, 0.02);
          v = std::clamp(v, 0.0, 1.0);
          sample.image.at(y, x) = static_cast<std::uint8_t>(std::lround(v * 255.0));
        }
      }

      sample.landmarks.height = h;
      sample.landmarks.width = w;
      sample.landmarks.points = px;
      sample.transform_id = 0;
      corpus.samples.push_back(std::move(sample));
    }
  }
  corpus.validate();
  return corpus;
}

}  // namespace vtlm
