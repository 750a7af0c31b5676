#pragma once

// Synthetic spatial-perception probes: ShapeGrid (shape templates arranged in
// slice-aligned layouts, four question types) and Sudoku (3x3 grid around a
// fixed red-pentagram anchor, relative-direction questions).
//
// Every item is generated from its own stream derive_seed(seed, index), so
// (seed, count) fixes every byte, and a dataset of n items is a prefix of
// any larger one with the same seed.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pvc/image.hpp"

namespace pvc {

inline constexpr std::size_t kCellSize = 336;

enum class ShapeKind { kTriangle, kSquare, kPentagram, kCircle, kPentagon, kHexagon, kStar4, kDiamond, kCross };
inline constexpr std::size_t kShapeCount = 9;

enum class GlyphKind { kBear, kCar, kPlane, kHouse };
inline constexpr std::size_t kGlyphCount = 4;

struct PaletteColor {
  std::string_view name;
  std::uint8_t r, g, b;
};

const std::array<PaletteColor, 7>& palette();
std::string_view shape_name(ShapeKind s);
std::string_view glyph_name(GlyphKind g);

enum class ProbeTask { kRelativeDistance, kRelativePosition, kRelativeArea, kCounting, kSudokuDirection };
std::string_view task_name(ProbeTask t);

struct Layout {
  std::size_t rows, cols;
};
/// 1x2, 2x3, 2x2 and the transposes 2x1, 3x2.
const std::array<Layout, 5>& shapegrid_layouts();

/// One occupied cell: either a palette-colored shape or a stylized glyph.
struct CellItem {
  std::size_t row = 0;
  std::size_t col = 0;
  bool is_glyph = false;
  ShapeKind shape = ShapeKind::kSquare;
  std::size_t color = 0;  // palette index, shapes only
  GlyphKind glyph = GlyphKind::kBear;
  double scale = 0.5;     // diameter as a fraction of the cell
  int offset_x = 0;       // jitter in pixels
  int offset_y = 0;

  std::string name() const;
  double radius() const { return scale * kCellSize / 2.0; }
  double center_x() const;
  double center_y() const;
};

struct GridSpec {
  Layout layout{1, 1};
  std::vector<CellItem> cells;

  std::size_t width() const { return layout.cols * kCellSize; }
  std::size_t height() const { return layout.rows * kCellSize; }
};

struct ProbeItem {
  std::string image_id;
  ProbeTask task = ProbeTask::kCounting;
  std::string question;
  std::string answer;
  nlohmann::json meta;
};

struct ProbeSample {
  GridSpec grid;
  ProbeItem item;
};

struct ProbeDataset {
  std::string kind;  // "shapegrid" or "sudoku"
  std::uint64_t seed = 0;
  std::vector<ProbeSample> samples;
};

/// Polygon outline (pixel coordinates) of a shape centered at (cx, cy) with
/// circumradius r. Empty for circles.
std::vector<std::array<double, 2>> shape_polygon(ShapeKind s, double cx, double cy, double r);
double shape_area(ShapeKind s, double r);

ProbeDataset gen_shapegrid(std::size_t count, std::uint64_t seed);
ProbeDataset gen_sudoku(std::size_t count, std::uint64_t seed);

RgbImage rasterize(const GridSpec& spec);

/// Recomputes the answer from item.meta alone.
std::string derive_answer(const ProbeItem& item);

nlohmann::json item_json(const ProbeItem& item);
nlohmann::json manifest_json(const ProbeDataset& ds);

/// Writes images/<id>.png, items.jsonl and finally manifest.json.
void write_dataset(const ProbeDataset& ds, const std::filesystem::path& out_dir);

}  // namespace pvc
