// Copyright 2026 The PriorSeq Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#include "priorseq/learning_curve.h"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "priorseq/error.h"

namespace priorseq {
namespace {

constexpr char kModule[] = "rl_trainer";

std::string Num(double x) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, r.ptr);
}

std::vector<std::string> SplitCommas(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

struct Frame {
  double x0 = 60, y0 = 30, w = 560, h = 300;
  int max_epoch = 1;
  double y_lo = 0, y_hi = 1;

  double X(double epoch) const { return x0 + w * epoch / max_epoch; }
  double Y(double v) const { return y0 + h * (1.0 - (v - y_lo) / (y_hi - y_lo)); }
};

Frame MakeFrame(const std::vector<const LearningCurve*>& curves,
                bool with_reward) {
  Frame f;
  double lo = 0.0, hi = 0.0;
  bool any = false;
  for (const auto* c : curves) {
    for (const auto& r : c->rows) {
      f.max_epoch = std::max(f.max_epoch, r.epoch);
      for (double v : {r.val_cider, with_reward ? r.mean_reward : r.val_cider}) {
        lo = any ? std::min(lo, v) : v;
        hi = any ? std::max(hi, v) : v;
        any = true;
      }
    }
  }
  lo = std::min(lo, 0.0);
  if (hi <= lo) hi = lo + 1.0;
  f.y_lo = lo;
  f.y_hi = hi;
  return f;
}

std::string Axes(const Frame& f, const std::string& title) {
  std::ostringstream o;
  o << "<rect x=\"0\" y=\"0\" width=\"680\" height=\"380\" fill=\"white\"/>\n";
  o << "<text x=\"340\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
    << title << "</text>\n";
  o << "<line x1=\"" << f.x0 << "\" y1=\"" << f.y0 + f.h << "\" x2=\""
    << f.x0 + f.w << "\" y2=\"" << f.y0 + f.h << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << f.x0 << "\" y1=\"" << f.y0 << "\" x2=\"" << f.x0
    << "\" y2=\"" << f.y0 + f.h << "\" stroke=\"black\"/>\n";
  o << "<text x=\"" << f.x0 + f.w / 2 << "\" y=\"365\" text-anchor=\"middle\""
    << " font-size=\"12\">epoch</text>\n";
  o << "<text x=\"" << f.x0 - 5 << "\" y=\"" << f.y0 + 4
    << "\" text-anchor=\"end\" font-size=\"10\">" << Num(f.y_hi) << "</text>\n";
  o << "<text x=\"" << f.x0 - 5 << "\" y=\"" << f.y0 + f.h
    << "\" text-anchor=\"end\" font-size=\"10\">" << Num(f.y_lo) << "</text>\n";
  o << "<text x=\"" << f.x0 + f.w << "\" y=\"" << f.y0 + f.h + 15
    << "\" text-anchor=\"end\" font-size=\"10\">" << f.max_epoch
    << "</text>\n";
  return o.str();
}

template <typename Get>
std::string Polyline(const Frame& f, const LearningCurve& c, Get get,
                     const char* color) {
  std::ostringstream o;
  o << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
  for (const auto& r : c.rows) {
    o << Num(f.X(r.epoch)) << "," << Num(f.Y(get(r))) << " ";
  }
  o << "\"/>\n";
  return o.str();
}

std::string Legend(int index, const std::string& label, const char* color) {
  std::ostringstream o;
  const int y = 45 + 15 * index;
  o << "<line x1=\"470\" y1=\"" << y << "\" x2=\"490\" y2=\"" << y
    << "\" stroke=\"" << color << "\"/>\n";
  o << "<text x=\"495\" y=\"" << y + 4 << "\" font-size=\"11\">" << label
    << "</text>\n";
  return o.str();
}

constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                   "#9467bd", "#ff7f0e", "#8c564b"};

}  // namespace

std::string LearningCurve::ToCsv() const {
  std::string out = kCurveHeader;
  out += '\n';
  for (const auto& r : rows) {
    out += std::to_string(r.epoch) + ',' + Num(r.seconds) + ',' +
           Num(r.mean_reward) + ',' + Num(r.mean_baseline) + ',' +
           Num(r.val_cider) + ',' + Num(r.val_bleu4) + ',' +
           Num(r.val_rouge_l) + ',' + Num(r.bad_end_rate) + ',' +
           Num(r.mean_mask_size) + ',' + std::to_string(r.fallbacks) + ',' +
           Num(r.lr) + '\n';
  }
  return out;
}

LearningCurve LearningCurve::FromCsv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCurveHeader) {
    throw Error(ErrorCode::kMalformedInput, kModule,
                "learning curve header mismatch");
  }
  LearningCurve curve;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = SplitCommas(line);
    if (cells.size() != 11) {
      throw Error(ErrorCode::kMalformedInput, kModule,
                  "learning curve line " + std::to_string(line_no) +
                      ": expected 11 fields");
    }
    try {
      CurveRow r;
      r.epoch = std::stoi(cells[0]);
      r.seconds = std::stod(cells[1]);
      r.mean_reward = std::stod(cells[2]);
      r.mean_baseline = std::stod(cells[3]);
      r.val_cider = std::stod(cells[4]);
      r.val_bleu4 = std::stod(cells[5]);
      r.val_rouge_l = std::stod(cells[6]);
      r.bad_end_rate = std::stod(cells[7]);
      r.mean_mask_size = std::stod(cells[8]);
      r.fallbacks = std::stoll(cells[9]);
      r.lr = std::stod(cells[10]);
      curve.rows.push_back(r);
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::kMalformedInput, kModule,
                  "learning curve line " + std::to_string(line_no) +
                      ": bad number");
    }
  }
  return curve;
}

void LearningCurve::Save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  out << ToCsv();
  if (!out) {
    throw Error(ErrorCode::kIo, kModule, "cannot write " + path.string());
  }
}

LearningCurve LearningCurve::Load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, kModule, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return FromCsv(ss.str());
}

std::string LearningCurve::ToSvg(const std::string& title) const {
  const Frame f = MakeFrame({this}, true);
  std::string out =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"680\" "
      "height=\"380\">\n";
  out += Axes(f, title);
  out += Polyline(f, *this, [](const CurveRow& r) { return r.mean_reward; },
                  kColors[0]);
  out += Polyline(f, *this, [](const CurveRow& r) { return r.val_cider; },
                  kColors[1]);
  out += Legend(0, "mean_reward", kColors[0]);
  out += Legend(1, "val_cider", kColors[1]);
  out += "</svg>\n";
  return out;
}

int LearningCurve::EpochsToReach(double target) const {
  for (const auto& r : rows) {
    if (r.val_cider >= target) return r.epoch;
  }
  return -1;
}

std::string CompareSvg(const std::vector<std::string>& labels,
                       const std::vector<LearningCurve>& curves) {
  std::vector<const LearningCurve*> ptrs;
  for (const auto& c : curves) ptrs.push_back(&c);
  const Frame f = MakeFrame(ptrs, false);
  std::string out =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"680\" "
      "height=\"380\">\n";
  out += Axes(f, "validation CIDEr-D");
  for (size_t i = 0; i < curves.size(); ++i) {
    const char* color = kColors[i % 6];
    out += Polyline(f, curves[i],
                    [](const CurveRow& r) { return r.val_cider; }, color);
    out += Legend(static_cast<int>(i),
                  i < labels.size() ? labels[i] : "run " + std::to_string(i),
                  color);
  }
  out += "</svg>\n";
  return out;
}

}  // namespace priorseq
