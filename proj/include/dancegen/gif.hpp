#pragma once

// Minimal GIF89a writer (global palette, per-frame LZW) plus a stick-figure
// renderer for pose sequences.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "dancegen/error.hpp"
#include "dancegen/pose.hpp"

namespace dancegen::gif {

namespace detail {

inline void put16(std::string& out, unsigned v) {
  out.push_back(char(v & 0xff));
  out.push_back(char((v >> 8) & 0xff));
}

/// GIF-variant LZW with variable code width, emitted LSB first.
inline std::string lzw_compress(const std::vector<std::uint8_t>& pixels, int min_code_size) {
  const int clear = 1 << min_code_size;
  const int end = clear + 1;
  std::string out;
  std::uint32_t bitbuf = 0;
  int bitcnt = 0;
  auto emit = [&](int code, int width) {
    bitbuf |= std::uint32_t(code) << bitcnt;
    bitcnt += width;
    while (bitcnt >= 8) {
      out.push_back(char(bitbuf & 0xff));
      bitbuf >>= 8;
      bitcnt -= 8;
    }
  };

  // dictionary: trie keyed by (prefix code, next pixel)
  std::vector<std::vector<int>> next;
  int code_width, next_code;
  auto reset = [&] {
    next.assign(4096, std::vector<int>(std::size_t(clear), -1));
    next_code = end + 1;
    code_width = min_code_size + 1;
  };
  reset();
  emit(clear, code_width);

  int cur = pixels.empty() ? -1 : pixels[0];
  for (std::size_t i = 1; i < pixels.size(); ++i) {
    int px = pixels[i];
    int found = next[std::size_t(cur)][std::size_t(px)];
    if (found >= 0) {
      cur = found;
      continue;
    }
    emit(cur, code_width);
    next[std::size_t(cur)][std::size_t(px)] = next_code;
    if (next_code < 4096) {
      if (next_code == (1 << code_width) && code_width < 12) ++code_width;
      ++next_code;
    }
    if (next_code >= 4096) {
      emit(clear, code_width);
      reset();
    }
    cur = px;
  }
  if (cur >= 0) emit(cur, code_width);
  emit(end, code_width);
  if (bitcnt > 0) out.push_back(char(bitbuf & 0xff));
  return out;
}

}  // namespace detail

/// Indexed-color frame buffer.
struct Canvas {
  int w = 0, h = 0;
  std::vector<std::uint8_t> px;

  Canvas(int width, int height, std::uint8_t fill = 0)
      : w(width), h(height), px(std::size_t(width) * std::size_t(height), fill) {}

  void set(int x, int y, std::uint8_t c) {
    if (x < 0 || y < 0 || x >= w || y >= h) return;
    px[std::size_t(y) * std::size_t(w) + std::size_t(x)] = c;
  }

  void line(int x0, int y0, int x1, int y1, std::uint8_t c) {
    int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    for (;;) {
      set(x0, y0, c);
      if (x0 == x1 && y0 == y1) break;
      int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }

  void dot(int x, int y, std::uint8_t c) {
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) set(x + dx, y + dy, c);
  }
};

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
};

/// Writes an animated, looping GIF. All frames share the palette (<= 16
/// colors) and the canvas size.
inline void write_gif(const std::string& path, const std::vector<Canvas>& frames,
                      const std::vector<Rgb>& palette, int delay_cs) {
  if (frames.empty()) throw insufficient_error("write_gif: no frames");
  if (palette.empty() || palette.size() > 16)
    throw contract_error("write_gif: palette must hold 1-16 colors");
  const int w = frames[0].w, h = frames[0].h;
  for (const auto& f : frames)
    if (f.w != w || f.h != h) throw contract_error("write_gif: frame size mismatch");

  std::string out;
  out += "GIF89a";
  detail::put16(out, unsigned(w));
  detail::put16(out, unsigned(h));
  out.push_back(char(0xf3));  // global table, 8-bit resolution, 16 entries
  out.push_back(0);           // background index
  out.push_back(0);           // aspect
  for (int i = 0; i < 16; ++i) {
    Rgb c = i < int(palette.size()) ? palette[std::size_t(i)] : Rgb{};
    out.push_back(char(c.r));
    out.push_back(char(c.g));
    out.push_back(char(c.b));
  }
  // NETSCAPE loop-forever extension
  out += "\x21\xff\x0bNETSCAPE2.0\x03\x01";
  detail::put16(out, 0);
  out.push_back(0);

  for (const auto& f : frames) {
    out += "\x21\xf9\x04\x04";  // graphic control, no disposal
    detail::put16(out, unsigned(delay_cs));
    out.push_back(0);  // no transparency
    out.push_back(0);
    out.push_back(0x2c);  // image descriptor
    detail::put16(out, 0);
    detail::put16(out, 0);
    detail::put16(out, unsigned(w));
    detail::put16(out, unsigned(h));
    out.push_back(0);  // no local table
    const int min_code = 4;
    out.push_back(char(min_code));
    auto data = detail::lzw_compress(f.px, min_code);
    for (std::size_t i = 0; i < data.size(); i += 255) {
      std::size_t n = std::min<std::size_t>(255, data.size() - i);
      out.push_back(char(n));
      out.append(data, i, n);
    }
    out.push_back(0);  // block terminator
  }
  out.push_back(0x3b);  // trailer

  std::ofstream file(path, std::ios::binary);
  if (!file) throw bad_input_error("cannot open for writing: " + path);
  file.write(out.data(), std::streamsize(out.size()));
}

/// Renders a pose sequence as a stick-figure animation.
inline void animate_poses(const PoseSequence& seq, const std::string& path,
                          int size = 256) {
  if (seq.frames.empty()) throw insufficient_error("animate_poses: empty sequence");
  static const int bones[][2] = {
      {kNose, kNeck},      {kNeck, kLShoulder},   {kNeck, kRShoulder},
      {kLShoulder, kLElbow}, {kLElbow, kLWrist},  {kRShoulder, kRElbow},
      {kRElbow, kRWrist},  {kNeck, kLHip},        {kNeck, kRHip},
      {kLHip, kRHip},      {kLHip, kLKnee},       {kLKnee, kLAnkle},
      {kRHip, kRKnee},     {kRKnee, kRAnkle},
  };
  // fit all frames into the canvas with a margin
  double min_x = 1e300, max_x = -1e300, min_y = 1e300, max_y = -1e300;
  for (const auto& f : seq.frames)
    for (int j = 0; j < kNumJoints; ++j) {
      min_x = std::min(min_x, f.joints[j].x);
      max_x = std::max(max_x, f.joints[j].x);
      min_y = std::min(min_y, f.joints[j].y);
      max_y = std::max(max_y, f.joints[j].y);
    }
  double span = std::max({max_x - min_x, max_y - min_y, 1e-6});
  double scale = (size - 20) / span;
  auto px = [&](Point p) {
    return std::pair<int, int>{int(std::lround(10 + (p.x - min_x) * scale)),
                               int(std::lround(10 + (p.y - min_y) * scale))};
  };

  std::vector<Canvas> frames;
  frames.reserve(seq.frames.size());
  for (const auto& f : seq.frames) {
    Canvas c(size, size, 0);
    for (const auto& bone : bones) {
      auto [x0, y0] = px(f.joints[bone[0]]);
      auto [x1, y1] = px(f.joints[bone[1]]);
      c.line(x0, y0, x1, y1, 1);
    }
    for (int j = 0; j < kNumJoints; ++j) {
      auto [x, y] = px(f.joints[j]);
      c.dot(x, y, 2);
    }
    frames.push_back(std::move(c));
  }
  int delay = std::max(2, int(std::lround(100.0 / std::max(1, seq.fps))));
  write_gif(path, frames, {{255, 255, 255}, {30, 30, 30}, {200, 40, 40}}, delay);
}

}  // namespace dancegen::gif
