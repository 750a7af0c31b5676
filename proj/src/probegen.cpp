#include "pvc/probegen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>

#include "pvc/error.hpp"
#include "pvc/random.hpp"
#include "pvc/tensor_file.hpp"

namespace pvc {

namespace {

constexpr std::array<std::string_view, kShapeCount> kShapeNames = {
    "triangle", "square", "pentagram", "circle", "pentagon", "hexagon", "star4", "diamond", "cross"};
constexpr std::array<std::string_view, kGlyphCount> kGlyphNames = {"bear", "car", "plane", "house"};

struct GlyphColor {
  std::uint8_t r, g, b;
};
constexpr std::array<GlyphColor, kGlyphCount> kGlyphColors = {
    GlyphColor{139, 69, 19}, GlyphColor{90, 90, 90}, GlyphColor{25, 25, 112}, GlyphColor{128, 0, 0}};

constexpr std::array<std::string_view, 5> kTaskNames = {"relative_distance", "relative_position", "relative_area",
                                                        "counting", "sudoku_direction"};

// Sudoku neighbours of the center, in direction-label order.
struct Neighbour {
  std::size_t row, col;
};
constexpr std::array<Neighbour, 8> kNeighbours = {Neighbour{0, 0}, Neighbour{0, 1}, Neighbour{0, 2},
                                                  Neighbour{1, 0}, Neighbour{1, 2}, Neighbour{2, 0},
                                                  Neighbour{2, 1}, Neighbour{2, 2}};

constexpr double kMinDistanceGap = 16.0;  // px
constexpr double kMinAreaRatio = 1.2;

std::string direction(long dr, long dc) {
  const char* vert = dr < 0 ? "upper" : dr > 0 ? "lower" : "";
  const char* horiz = dc < 0 ? "left" : dc > 0 ? "right" : "";
  if (dr == 0) return horiz;
  if (dc == 0) return dr < 0 ? "above" : "below";
  return std::string(vert) + " " + horiz;
}

std::string direction_between(const CellItem& a, const CellItem& b) {
  return direction(static_cast<long>(a.row) - static_cast<long>(b.row),
                   static_cast<long>(a.col) - static_cast<long>(b.col));
}

double distance_to_center(const CellItem& c, const Layout& layout) {
  const double ix = layout.cols * kCellSize / 2.0;
  const double iy = layout.rows * kCellSize / 2.0;
  return std::hypot(c.center_x() - ix, c.center_y() - iy);
}

double item_area(const CellItem& c) { return shape_area(c.shape, c.radius()); }

nlohmann::json cell_json(const CellItem& c) {
  nlohmann::json j = {{"row", c.row},       {"col", c.col},          {"name", c.name()},
                      {"scale", c.scale},   {"offset_x", c.offset_x}, {"offset_y", c.offset_y},
                      {"center_x", c.center_x()}, {"center_y", c.center_y()}};
  if (c.is_glyph) {
    j["kind"] = "glyph";
    j["glyph"] = glyph_name(c.glyph);
  } else {
    j["kind"] = "shape";
    j["shape"] = shape_name(c.shape);
    j["color"] = palette()[c.color].name;
    j["area"] = item_area(c);
  }
  return j;
}

template <std::size_t N>
std::size_t index_of(const std::array<std::string_view, N>& names, const std::string& s) {
  const auto it = std::find(names.begin(), names.end(), s);
  if (it == names.end()) throw ValidationError("probe meta: unknown name '" + s + "'");
  return static_cast<std::size_t>(it - names.begin());
}

CellItem cell_from_json(const nlohmann::json& j) {
  CellItem c;
  c.row = j.at("row").get<std::size_t>();
  c.col = j.at("col").get<std::size_t>();
  c.scale = j.at("scale").get<double>();
  c.offset_x = j.at("offset_x").get<int>();
  c.offset_y = j.at("offset_y").get<int>();
  if (j.at("kind") == "glyph") {
    c.is_glyph = true;
    c.glyph = static_cast<GlyphKind>(index_of(kGlyphNames, j.at("glyph").get<std::string>()));
  } else {
    c.shape = static_cast<ShapeKind>(index_of(kShapeNames, j.at("shape").get<std::string>()));
    const std::string color = j.at("color").get<std::string>();
    const auto& pal = palette();
    const auto it = std::find_if(pal.begin(), pal.end(), [&](const PaletteColor& p) { return p.name == color; });
    if (it == pal.end()) throw ValidationError("probe meta: unknown color '" + color + "'");
    c.color = static_cast<std::size_t>(it - pal.begin());
  }
  return c;
}

const CellItem& find_cell(const std::vector<CellItem>& cells, const std::string& name) {
  for (const auto& c : cells)
    if (c.name() == name) return c;
  throw ValidationError("probe meta: no cell named '" + name + "'");
}

// Scale in [lo, hi] rounded to 0.01 and an integer offset that keeps the
// shape inside its cell.
void jitter(Rng& rng, CellItem& c, double lo, double hi) {
  c.scale = std::round(rng.uniform(lo, hi) * 100.0) / 100.0;
  const int max_off = static_cast<int>(std::floor((1.0 - c.scale) * kCellSize / 2.0));
  c.offset_x = max_off > 0 ? static_cast<int>(rng.below(2 * max_off + 1)) - max_off : 0;
  c.offset_y = max_off > 0 ? static_cast<int>(rng.below(2 * max_off + 1)) - max_off : 0;
}

std::pair<std::size_t, std::size_t> pick_pair(Rng& rng, std::size_t n) {
  const std::size_t a = rng.below(n);
  std::size_t b = rng.below(n - 1);
  if (b >= a) ++b;
  return {a, b};
}

std::string image_id(const std::string& kind, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%06zu", kind.c_str(), index);
  return buf;
}

nlohmann::json grid_meta(const GridSpec& g) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : g.cells) cells.push_back(cell_json(c));
  return {{"layout", std::to_string(g.layout.rows) + "x" + std::to_string(g.layout.cols)},
          {"rows", g.layout.rows},
          {"cols", g.layout.cols},
          {"cell_size", kCellSize},
          {"cells", cells}};
}

ProbeSample make_shapegrid_item(std::uint64_t seed, std::size_t index) {
  Rng rng(derive_seed(seed, index));
  const auto task = static_cast<ProbeTask>(index % 4);
  const Layout layout = shapegrid_layouts()[(index / 4) % shapegrid_layouts().size()];
  const std::size_t n = layout.rows * layout.cols;

  // Templates without replacement: distinct (shape, color) identities.
  std::vector<std::size_t> ids(kShapeCount * palette().size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  for (std::size_t i = 0; i < n; ++i) std::swap(ids[i], ids[i + rng.below(ids.size() - i)]);

  GridSpec grid{layout, {}};
  for (std::size_t i = 0; i < n; ++i) {
    CellItem c;
    c.row = i / layout.cols;
    c.col = i % layout.cols;
    c.shape = static_cast<ShapeKind>(ids[i] / palette().size());
    c.color = ids[i] % palette().size();
    jitter(rng, c, 0.3, 0.9);
    grid.cells.push_back(c);
  }

  ProbeItem item;
  item.image_id = image_id("shapegrid", index);
  item.task = task;
  nlohmann::json query;
  switch (task) {
    case ProbeTask::kRelativeDistance: {
      auto [a, b] = pick_pair(rng, n);
      while (std::abs(distance_to_center(grid.cells[a], layout) - distance_to_center(grid.cells[b], layout)) <
             kMinDistanceGap) {
        jitter(rng, grid.cells[b], 0.3, 0.9);
      }
      const auto an = grid.cells[a].name(), bn = grid.cells[b].name();
      item.question = "Which is closer to the center of the image: the " + an + " or the " + bn + "?";
      query = {{"a", an}, {"b", bn}};
      break;
    }
    case ProbeTask::kRelativePosition: {
      auto [a, b] = pick_pair(rng, n);
      const auto an = grid.cells[a].name(), bn = grid.cells[b].name();
      item.question = "Where is the " + an + " relative to the " + bn + "?";
      query = {{"a", an}, {"b", bn}};
      break;
    }
    case ProbeTask::kRelativeArea: {
      auto [a, b] = pick_pair(rng, n);
      auto ratio = [&] {
        const double x = item_area(grid.cells[a]), y = item_area(grid.cells[b]);
        return std::max(x, y) / std::min(x, y);
      };
      while (ratio() < kMinAreaRatio) jitter(rng, grid.cells[b], 0.3, 0.9);
      const auto an = grid.cells[a].name(), bn = grid.cells[b].name();
      item.question = "Which appears larger: the " + an + " or the " + bn + "?";
      query = {{"a", an}, {"b", bn}};
      break;
    }
    case ProbeTask::kCounting: {
      const bool by_color = rng.below(2) == 0;
      // Mostly ask about something present; sometimes about anything.
      const bool from_grid = rng.below(4) != 0;
      const CellItem& ref = grid.cells[rng.below(n)];
      if (by_color) {
        const std::size_t color = from_grid ? ref.color : rng.below(palette().size());
        const std::string value(palette()[color].name);
        item.question = "How many " + value + " shapes are in the image?";
        query = {{"predicate", "color"}, {"value", value}};
      } else {
        const auto shape = from_grid ? ref.shape : static_cast<ShapeKind>(rng.below(kShapeCount));
        const std::string value(shape_name(shape));
        item.question = "How many " + value + " shapes are in the image?";
        query = {{"predicate", "shape"}, {"value", value}};
      }
      break;
    }
    case ProbeTask::kSudokuDirection:
      break;
  }
  item.meta = grid_meta(grid);
  item.meta["query"] = query;
  item.answer = derive_answer(item);
  return {std::move(grid), std::move(item)};
}

ProbeSample make_sudoku_item(std::uint64_t seed, std::size_t index) {
  Rng rng(derive_seed(seed, index));
  GridSpec grid{{3, 3}, {}};
  CellItem anchor;
  anchor.row = 1;
  anchor.col = 1;
  anchor.shape = ShapeKind::kPentagram;
  anchor.color = 0;  // red
  anchor.scale = 0.6;

  // Pool: every shape template except the anchor identity, plus glyphs.
  const std::size_t shape_ids = kShapeCount * palette().size();
  const std::size_t anchor_id = static_cast<std::size_t>(ShapeKind::kPentagram) * palette().size();
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < shape_ids + kGlyphCount; ++i)
    if (i != anchor_id) pool.push_back(i);
  for (std::size_t i = 0; i < 8; ++i) std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);

  for (std::size_t i = 0; i < 8; ++i) {
    CellItem c;
    c.row = kNeighbours[i].row;
    c.col = kNeighbours[i].col;
    if (pool[i] >= shape_ids) {
      c.is_glyph = true;
      c.glyph = static_cast<GlyphKind>(pool[i] - shape_ids);
    } else {
      c.shape = static_cast<ShapeKind>(pool[i] / palette().size());
      c.color = pool[i] % palette().size();
    }
    jitter(rng, c, 0.4, 0.8);
    grid.cells.push_back(c);
  }
  grid.cells.insert(grid.cells.begin() + 4, anchor);

  const Neighbour target_pos = kNeighbours[index % 8];
  const CellItem& target = grid.cells[target_pos.row * 3 + target_pos.col];
  if (target.row != target_pos.row || target.col != target_pos.col) {
    throw Error("gen_sudoku: target cell missing from grid");
  }

  ProbeItem item;
  item.image_id = image_id("sudoku", index);
  item.task = ProbeTask::kSudokuDirection;
  item.question = "In which direction is the " + target.name() + " relative to the red pentagram in the center?";
  item.meta = grid_meta(grid);
  item.meta["query"] = {{"target", target.name()}, {"anchor", anchor.name()}};
  item.answer = derive_answer(item);
  return {std::move(grid), std::move(item)};
}

// Even-odd scanline fill, sampling at pixel centers.
void fill_polygon(RgbImage& img, const std::vector<std::array<double, 2>>& poly, std::uint8_t r, std::uint8_t g,
                  std::uint8_t b) {
  double ymin = poly[0][1], ymax = poly[0][1];
  for (const auto& p : poly) {
    ymin = std::min(ymin, p[1]);
    ymax = std::max(ymax, p[1]);
  }
  const long y0 = std::max(0L, static_cast<long>(std::floor(ymin)));
  const long y1 = std::min(static_cast<long>(img.height) - 1, static_cast<long>(std::ceil(ymax)));
  std::vector<double> xs;
  for (long y = y0; y <= y1; ++y) {
    const double yc = static_cast<double>(y) + 0.5;
    xs.clear();
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const auto& p = poly[i];
      const auto& q = poly[(i + 1) % poly.size()];
      if ((p[1] <= yc && yc < q[1]) || (q[1] <= yc && yc < p[1])) {
        xs.push_back(p[0] + (yc - p[1]) * (q[0] - p[0]) / (q[1] - p[1]));
      }
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      const long xa = std::max(0L, static_cast<long>(std::ceil(xs[k] - 0.5)));
      const long xb = std::min(static_cast<long>(img.width), static_cast<long>(std::ceil(xs[k + 1] - 0.5)));
      for (long x = xa; x < xb; ++x) {
        std::uint8_t* px = img.px(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
        px[0] = r;
        px[1] = g;
        px[2] = b;
      }
    }
  }
}

void fill_circle(RgbImage& img, double cx, double cy, double radius, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const long y0 = std::max(0L, static_cast<long>(std::floor(cy - radius)));
  const long y1 = std::min(static_cast<long>(img.height) - 1, static_cast<long>(std::ceil(cy + radius)));
  for (long y = y0; y <= y1; ++y) {
    const double dy = static_cast<double>(y) + 0.5 - cy;
    const double span2 = radius * radius - dy * dy;
    if (span2 <= 0.0) continue;
    const double half = std::sqrt(span2);
    const long xa = std::max(0L, static_cast<long>(std::ceil(cx - half - 0.5)));
    const long xb = std::min(static_cast<long>(img.width), static_cast<long>(std::ceil(cx + half - 0.5)));
    for (long x = xa; x < xb; ++x) {
      std::uint8_t* px = img.px(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
      px[0] = r;
      px[1] = g;
      px[2] = b;
    }
  }
}

using Poly = std::vector<std::array<double, 2>>;

Poly rect(double cx, double cy, double x0, double y0, double x1, double y1) {
  return {{cx + x0, cy + y0}, {cx + x1, cy + y0}, {cx + x1, cy + y1}, {cx + x0, cy + y1}};
}

void draw_glyph(RgbImage& img, const CellItem& c) {
  const double cx = c.center_x(), cy = c.center_y(), r = c.radius();
  const auto col = kGlyphColors[static_cast<std::size_t>(c.glyph)];
  switch (c.glyph) {
    case GlyphKind::kBear:
      fill_circle(img, cx, cy + 0.15 * r, 0.75 * r, col.r, col.g, col.b);
      fill_circle(img, cx - 0.55 * r, cy - 0.55 * r, 0.3 * r, col.r, col.g, col.b);
      fill_circle(img, cx + 0.55 * r, cy - 0.55 * r, 0.3 * r, col.r, col.g, col.b);
      break;
    case GlyphKind::kCar:
      fill_polygon(img, rect(cx, cy, -r, -0.25 * r, r, 0.35 * r), col.r, col.g, col.b);
      fill_polygon(img, rect(cx, cy, -0.5 * r, -0.7 * r, 0.45 * r, -0.25 * r), col.r, col.g, col.b);
      fill_circle(img, cx - 0.55 * r, cy + 0.45 * r, 0.28 * r, col.r, col.g, col.b);
      fill_circle(img, cx + 0.55 * r, cy + 0.45 * r, 0.28 * r, col.r, col.g, col.b);
      break;
    case GlyphKind::kPlane:
      fill_polygon(img, rect(cx, cy, -0.12 * r, -r, 0.12 * r, r), col.r, col.g, col.b);
      fill_polygon(img, {{cx - r, cy + 0.1 * r}, {cx, cy - 0.35 * r}, {cx + r, cy + 0.1 * r}, {cx, cy + 0.05 * r}},
                   col.r, col.g, col.b);
      fill_polygon(img, {{cx - 0.4 * r, cy + r}, {cx, cy + 0.7 * r}, {cx + 0.4 * r, cy + r}}, col.r, col.g, col.b);
      break;
    case GlyphKind::kHouse:
      fill_polygon(img, rect(cx, cy, -0.7 * r, -0.1 * r, 0.7 * r, r), col.r, col.g, col.b);
      fill_polygon(img, {{cx - r, cy - 0.1 * r}, {cx, cy - r}, {cx + r, cy - 0.1 * r}}, col.r, col.g, col.b);
      break;
  }
}

}  // namespace

const std::array<PaletteColor, 7>& palette() {
  static const std::array<PaletteColor, 7> kPalette = {
      PaletteColor{"red", 220, 20, 20},    PaletteColor{"yellow", 240, 200, 0}, PaletteColor{"blue", 30, 80, 220},
      PaletteColor{"green", 30, 160, 60},  PaletteColor{"purple", 140, 50, 180},
      PaletteColor{"orange", 245, 130, 20}, PaletteColor{"cyan", 0, 190, 200}};
  return kPalette;
}

std::string_view shape_name(ShapeKind s) { return kShapeNames[static_cast<std::size_t>(s)]; }
std::string_view glyph_name(GlyphKind g) { return kGlyphNames[static_cast<std::size_t>(g)]; }
std::string_view task_name(ProbeTask t) { return kTaskNames[static_cast<std::size_t>(t)]; }

const std::array<Layout, 5>& shapegrid_layouts() {
  static const std::array<Layout, 5> kLayouts = {Layout{1, 2}, Layout{2, 3}, Layout{2, 2}, Layout{2, 1}, Layout{3, 2}};
  return kLayouts;
}

std::string CellItem::name() const {
  if (is_glyph) return std::string(glyph_name(glyph));
  return std::string(palette()[color].name) + " " + std::string(shape_name(shape));
}

double CellItem::center_x() const {
  return static_cast<double>(col * kCellSize + kCellSize / 2) + offset_x;
}

double CellItem::center_y() const {
  return static_cast<double>(row * kCellSize + kCellSize / 2) + offset_y;
}

std::vector<std::array<double, 2>> shape_polygon(ShapeKind s, double cx, double cy, double r) {
  auto regular = [&](int n, double inner_ratio) {
    Poly p;
    const int verts = inner_ratio > 0.0 ? 2 * n : n;
    for (int i = 0; i < verts; ++i) {
      const double ang = -std::numbers::pi / 2 + 2.0 * std::numbers::pi * i / verts;
      const double rad = (inner_ratio > 0.0 && i % 2 == 1) ? r * inner_ratio : r;
      p.push_back({cx + rad * std::cos(ang), cy + rad * std::sin(ang)});
    }
    return p;
  };
  switch (s) {
    case ShapeKind::kTriangle: return regular(3, 0.0);
    case ShapeKind::kSquare: return rect(cx, cy, -r, -r, r, r);
    case ShapeKind::kPentagram: {
      // Inner radius of a regular {5/2} star.
      const double inner = std::sin(std::numbers::pi / 10) / std::sin(7 * std::numbers::pi / 10);
      return regular(5, inner);
    }
    case ShapeKind::kCircle: return {};
    case ShapeKind::kPentagon: return regular(5, 0.0);
    case ShapeKind::kHexagon: return regular(6, 0.0);
    case ShapeKind::kStar4: return regular(4, 0.4);
    case ShapeKind::kDiamond: return {{cx, cy - r}, {cx + r, cy}, {cx, cy + r}, {cx - r, cy}};
    case ShapeKind::kCross: {
      const double w = r / 3.0;
      return {{cx - w, cy - r}, {cx + w, cy - r}, {cx + w, cy - w}, {cx + r, cy - w}, {cx + r, cy + w},
              {cx + w, cy + w}, {cx + w, cy + r}, {cx - w, cy + r}, {cx - w, cy + w}, {cx - r, cy + w},
              {cx - r, cy - w}, {cx - w, cy - w}};
    }
  }
  return {};
}

double shape_area(ShapeKind s, double r) {
  if (s == ShapeKind::kCircle) return std::numbers::pi * r * r;
  const auto p = shape_polygon(s, 0.0, 0.0, r);
  double twice = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto& a = p[i];
    const auto& b = p[(i + 1) % p.size()];
    twice += a[0] * b[1] - b[0] * a[1];
  }
  return std::abs(twice) / 2.0;
}

ProbeDataset gen_shapegrid(std::size_t count, std::uint64_t seed) {
  if (count == 0) throw ValidationError("gen_shapegrid: count must be >= 1");
  ProbeDataset ds{"shapegrid", seed, {}};
  ds.samples.reserve(count);
  for (std::size_t i = 0; i < count; ++i) ds.samples.push_back(make_shapegrid_item(seed, i));
  return ds;
}

ProbeDataset gen_sudoku(std::size_t count, std::uint64_t seed) {
  if (count == 0) throw ValidationError("gen_sudoku: count must be >= 1");
  ProbeDataset ds{"sudoku", seed, {}};
  ds.samples.reserve(count);
  for (std::size_t i = 0; i < count; ++i) ds.samples.push_back(make_sudoku_item(seed, i));
  return ds;
}

RgbImage rasterize(const GridSpec& spec) {
  RgbImage img(spec.width(), spec.height(), 255, 255, 255);
  for (const auto& c : spec.cells) {
    if (c.row >= spec.layout.rows || c.col >= spec.layout.cols) {
      throw ValidationError("rasterize: cell outside layout");
    }
    if (c.is_glyph) {
      draw_glyph(img, c);
      continue;
    }
    const auto& col = palette()[c.color];
    if (c.shape == ShapeKind::kCircle) {
      fill_circle(img, c.center_x(), c.center_y(), c.radius(), col.r, col.g, col.b);
    } else {
      fill_polygon(img, shape_polygon(c.shape, c.center_x(), c.center_y(), c.radius()), col.r, col.g, col.b);
    }
  }
  return img;
}

std::string derive_answer(const ProbeItem& item) {
  const auto& meta = item.meta;
  try {
    std::vector<CellItem> cells;
    for (const auto& jc : meta.at("cells")) cells.push_back(cell_from_json(jc));
    const Layout layout{meta.at("rows").get<std::size_t>(), meta.at("cols").get<std::size_t>()};
    const auto& q = meta.at("query");
    switch (item.task) {
      case ProbeTask::kRelativeDistance: {
        const auto& a = find_cell(cells, q.at("a"));
        const auto& b = find_cell(cells, q.at("b"));
        return distance_to_center(a, layout) < distance_to_center(b, layout) ? a.name() : b.name();
      }
      case ProbeTask::kRelativePosition:
        return direction_between(find_cell(cells, q.at("a")), find_cell(cells, q.at("b")));
      case ProbeTask::kRelativeArea: {
        const auto& a = find_cell(cells, q.at("a"));
        const auto& b = find_cell(cells, q.at("b"));
        return item_area(a) > item_area(b) ? a.name() : b.name();
      }
      case ProbeTask::kCounting: {
        const std::string pred = q.at("predicate");
        const std::string value = q.at("value");
        std::size_t n = 0;
        for (const auto& c : cells) {
          if (c.is_glyph) continue;
          if ((pred == "color" && palette()[c.color].name == value) || (pred == "shape" && shape_name(c.shape) == value)) {
            ++n;
          }
        }
        return std::to_string(n);
      }
      case ProbeTask::kSudokuDirection:
        return direction_between(find_cell(cells, q.at("target")), find_cell(cells, q.at("anchor")));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("probe meta: ") + e.what());
  }
  throw ValidationError("derive_answer: unknown task");
}

nlohmann::json item_json(const ProbeItem& item) {
  return {{"image", "images/" + item.image_id + ".png"},
          {"task", task_name(item.task)},
          {"question", item.question},
          {"answer", item.answer},
          {"meta", item.meta}};
}

nlohmann::json manifest_json(const ProbeDataset& ds) {
  std::map<std::string, std::size_t> tasks, layouts, answers;
  for (const auto& s : ds.samples) {
    ++tasks[std::string(task_name(s.item.task))];
    ++layouts[s.item.meta.at("layout").get<std::string>()];
    if (s.item.task == ProbeTask::kSudokuDirection) ++answers[s.item.answer];
  }
  nlohmann::json pal = nlohmann::json::array();
  for (const auto& p : palette()) pal.push_back({{"name", p.name}, {"rgb", {p.r, p.g, p.b}}});
  nlohmann::json m = {{"kind", ds.kind},
                      {"seed", ds.seed},
                      {"count", ds.samples.size()},
                      {"cell_size", kCellSize},
                      {"palette", pal},
                      {"shapes", kShapeNames},
                      {"glyphs", kGlyphNames},
                      {"balance", "uniform: task = index mod 4, layout = (index / 4) mod 5"},
                      {"task_counts", tasks},
                      {"layout_counts", layouts},
                      {"image_format", "png"}};
  if (ds.kind == "sudoku") {
    m["balance"] = "uniform: target direction = index mod 8";
    m["direction_counts"] = answers;
  }
  return m;
}

void write_dataset(const ProbeDataset& ds, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "images");
  std::error_code ec;
  fs::remove(out_dir / "manifest.json", ec);
  std::string jsonl;
  for (const auto& s : ds.samples) {
    write_image(out_dir / "images" / (s.item.image_id + ".png"), rasterize(s.grid));
    jsonl += item_json(s.item).dump() + "\n";
  }
  write_file_atomic(out_dir / "items.jsonl", jsonl);
  write_file_atomic(out_dir / "manifest.json", manifest_json(ds).dump(2) + "\n");
}

}  // namespace pvc
