#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "pvc/error.hpp"
#include "pvc/probegen.hpp"

using namespace pvc;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pvc_test_probegen_" + name);
  fs::remove_all(p);
  return p;
}

bool same_rgb(const std::uint8_t* px, const PaletteColor& c) { return px[0] == c.r && px[1] == c.g && px[2] == c.b; }

// Answer oracle working only from the raw JSON fields (pixel centers and stored
// areas), independent of the generator's own CellItem reconstruction.
std::string oracle_answer(const nlohmann::json& item) {
  const auto& meta = item.at("meta");
  const auto& q = meta.at("query");
  const auto cell = [&](const std::string& name) {
    for (const auto& c : meta.at("cells"))
      if (c.at("name") == name) return c;
    throw std::runtime_error("missing " + name);
  };
  const double cell_size = meta.at("cell_size");
  const auto grid_pos = [&](const nlohmann::json& c) {
    return std::pair<long, long>{static_cast<long>(std::floor(c.at("center_y").get<double>() / cell_size)),
                                 static_cast<long>(std::floor(c.at("center_x").get<double>() / cell_size))};
  };
  const auto dir = [&](const nlohmann::json& a, const nlohmann::json& b) {
    const auto [ar, ac] = grid_pos(a);
    const auto [br, bc] = grid_pos(b);
    static const std::map<std::pair<int, int>, std::string> names{
        {{-1, -1}, "upper left"}, {{-1, 0}, "above"}, {{-1, 1}, "upper right"}, {{0, -1}, "left"},
        {{0, 1}, "right"},        {{1, -1}, "lower left"}, {{1, 0}, "below"},  {{1, 1}, "lower right"}};
    const auto sgn = [](long v) { return v < 0 ? -1 : v > 0 ? 1 : 0; };
    return names.at({sgn(ar - br), sgn(ac - bc)});
  };
  const std::string task = item.at("task");
  if (task == "relative_distance") {
    const double cx = meta.at("cols").get<double>() * cell_size / 2, cy = meta.at("rows").get<double>() * cell_size / 2;
    const auto d = [&](const nlohmann::json& c) {
      return std::hypot(c.at("center_x").get<double>() - cx, c.at("center_y").get<double>() - cy);
    };
    const auto a = cell(q.at("a")), b = cell(q.at("b"));
    return d(a) < d(b) ? a.at("name") : b.at("name");
  }
  if (task == "relative_area") {
    const auto a = cell(q.at("a")), b = cell(q.at("b"));
    return a.at("area").get<double>() > b.at("area").get<double>() ? a.at("name") : b.at("name");
  }
  if (task == "relative_position") return dir(cell(q.at("a")), cell(q.at("b")));
  if (task == "sudoku_direction") return dir(cell(q.at("target")), cell(q.at("anchor")));
  if (task == "counting") {
    const std::string key = q.at("predicate"), value = q.at("value");
    int n = 0;
    for (const auto& c : meta.at("cells"))
      if (c.at("kind") == "shape" && c.at(key) == value) ++n;
    return std::to_string(n);
  }
  throw std::runtime_error("unknown task " + task);
}

}  // namespace

TEST_CASE("inventories") {
  CHECK(kShapeCount == 9);
  CHECK(palette().size() == 7);
  CHECK(palette()[0].name == "red");
  CHECK(shape_name(ShapeKind::kPentagram) == "pentagram");
  std::set<std::pair<std::size_t, std::size_t>> sizes;
  for (const auto& l : shapegrid_layouts()) sizes.insert({l.rows, l.cols});
  CHECK(sizes == std::set<std::pair<std::size_t, std::size_t>>{{1, 2}, {2, 3}, {2, 2}, {2, 1}, {3, 2}});
}

TEST_CASE("shape areas match closed forms") {
  const double r = 10.0;
  const double pi = std::numbers::pi;
  CHECK(shape_area(ShapeKind::kSquare, r) == doctest::Approx(4 * r * r));
  CHECK(shape_area(ShapeKind::kDiamond, r) == doctest::Approx(2 * r * r));
  CHECK(shape_area(ShapeKind::kCircle, r) == doctest::Approx(pi * r * r));
  CHECK(shape_area(ShapeKind::kTriangle, r) == doctest::Approx(3 * std::sqrt(3.0) / 4 * r * r));
  CHECK(shape_area(ShapeKind::kPentagon, r) == doctest::Approx(2.5 * std::sin(2 * pi / 5) * r * r));
  CHECK(shape_area(ShapeKind::kHexagon, r) == doctest::Approx(1.5 * std::sqrt(3.0) * r * r));
  // Ten triangles between outer and inner vertices, 36 degrees apart.
  const double inner = std::sin(pi / 10) / std::sin(7 * pi / 10);
  CHECK(shape_area(ShapeKind::kPentagram, r) == doctest::Approx(5 * r * (inner * r) * std::sin(pi / 5)));
  CHECK(shape_area(ShapeKind::kStar4, r) == doctest::Approx(4 * r * (0.4 * r) * std::sin(pi / 4)));
  // Plus sign: two 2r x 2w bars minus the doubly counted centre, w = r/3.
  CHECK(shape_area(ShapeKind::kCross, r) == doctest::Approx(20.0 / 9.0 * r * r));
}

TEST_CASE("rasterize: image sizes") {
  CHECK(rasterize(GridSpec{{1, 2}, {}}).width == 672);
  CHECK(rasterize(GridSpec{{1, 2}, {}}).height == 336);
  const auto sudoku = gen_sudoku(1, 0);
  const RgbImage img = rasterize(sudoku.samples[0].grid);
  CHECK(img.width == 1008);
  CHECK(img.height == 1008);
}

TEST_CASE("rasterize: red square pixel probe") {
  CellItem sq;
  sq.shape = ShapeKind::kSquare;
  sq.color = 0;
  sq.scale = 0.5;
  const RgbImage img = rasterize(GridSpec{{1, 1}, {sq}});
  const auto& red = palette()[0];
  std::size_t red_pixels = 0;
  for (std::size_t y = 0; y < 336; ++y)
    for (std::size_t x = 0; x < 336; ++x) red_pixels += same_rgb(img.px(x, y), red);
  CHECK(red_pixels == 168 * 168);
  for (std::size_t y = 84; y < 252; ++y)
    for (std::size_t x = 84; x < 252; ++x) REQUIRE(same_rgb(img.px(x, y), red));
  for (auto [x, y] : {std::pair{0, 0}, {335, 0}, {0, 335}, {335, 335}, {83, 168}, {252, 168}}) {
    const auto* p = img.px(x, y);
    CHECK((p[0] == 255 && p[1] == 255 && p[2] == 255));
  }
  CellItem outside = sq;
  outside.row = 1;
  CHECK_THROWS_AS(rasterize(GridSpec{{1, 1}, {outside}}), ValidationError);
}

TEST_CASE("shapegrid: balance, distinct templates, containment") {
  const auto ds = gen_shapegrid(4000, 0);
  REQUIRE(ds.samples.size() == 4000);
  std::map<std::pair<int, std::string>, int> cells;
  for (const auto& s : ds.samples) {
    ++cells[{static_cast<int>(s.item.task), s.item.meta.at("layout").get<std::string>()}];
    const auto& g = s.grid;
    REQUIRE(g.cells.size() == g.layout.rows * g.layout.cols);
    std::set<std::string> names;
    for (const auto& c : g.cells) {
      names.insert(c.name());
      CHECK(c.scale >= 0.3);
      CHECK(c.scale <= 0.9);
      // Bounding circle stays inside the cell.
      const double x0 = static_cast<double>(c.col * kCellSize), y0 = static_cast<double>(c.row * kCellSize);
      CHECK(c.center_x() - c.radius() >= x0);
      CHECK(c.center_x() + c.radius() <= x0 + kCellSize);
      CHECK(c.center_y() - c.radius() >= y0);
      CHECK(c.center_y() + c.radius() <= y0 + kCellSize);
    }
    CHECK(names.size() == g.cells.size());
  }
  CHECK(cells.size() == 20);
  for (const auto& [k, n] : cells) CHECK(n == 200);
  const auto m = manifest_json(ds);
  CHECK(m.at("count") == 4000);
  CHECK(m.at("task_counts").size() == 4);
  CHECK(m.at("layout_counts").size() == 5);
}

TEST_CASE("ground truth re-derives from metadata") {
  for (const auto& ds : {gen_shapegrid(4000, 7), gen_sudoku(8000, 7)}) {
    for (const auto& s : ds.samples) {
      REQUIRE(derive_answer(s.item) == s.item.answer);
      REQUIRE(oracle_answer(item_json(s.item)) == s.item.answer);
    }
  }
}

TEST_CASE("counting answers equal rendered matches") {
  const auto ds = gen_shapegrid(200, 3);
  std::size_t nonzero = 0, zero = 0;
  for (const auto& s : ds.samples) {
    if (s.item.task != ProbeTask::kCounting) continue;
    const RgbImage img = rasterize(s.grid);
    const std::string key = s.item.meta["query"]["predicate"], value = s.item.meta["query"]["value"];
    int n = 0;
    for (const auto& c : s.grid.cells) {
      // Every shape covers its own centre pixel with its palette colour.
      const auto* px = img.px(static_cast<std::size_t>(c.center_x()), static_cast<std::size_t>(c.center_y()));
      REQUIRE(same_rgb(px, palette()[c.color]));
      const bool match = key == "color" ? palette()[c.color].name == value : shape_name(c.shape) == value;
      n += match;
    }
    CHECK(std::to_string(n) == s.item.answer);
    (n ? nonzero : zero) += 1;
  }
  CHECK(nonzero > 0);
}

TEST_CASE("sudoku: anchor, pool, direction balance") {
  const auto ds = gen_sudoku(8000, 0);
  REQUIRE(ds.samples.size() == 8000);
  std::map<std::string, int> dirs;
  std::size_t glyphs = 0;
  for (const auto& s : ds.samples) {
    const auto& g = s.grid;
    REQUIRE(g.cells.size() == 9);
    const auto& center = g.cells[4];
    REQUIRE((center.row == 1 && center.col == 1));
    REQUIRE((!center.is_glyph && center.shape == ShapeKind::kPentagram && center.color == 0));
    std::set<std::string> names;
    for (const auto& c : g.cells) {
      names.insert(c.name());
      glyphs += c.is_glyph;
    }
    CHECK(names.size() == 9);
    ++dirs[s.item.answer];
  }
  CHECK(dirs.size() == 8);
  for (const auto& [d, n] : dirs) {
    CHECK(n >= 800);
    CHECK(n <= 1200);
  }
  CHECK(glyphs > 0);

  // Rendered anchor: the pixel at the image center is red.
  const RgbImage img = rasterize(ds.samples[5].grid);
  CHECK(same_rgb(img.px(504, 504), palette()[0]));
  CHECK(ds.samples[0].item.question == "In which direction is the " + ds.samples[0].item.meta["query"]["target"].get<std::string>() +
                                           " relative to the red pentagram in the center?");
}

TEST_CASE("determinism and prefix property") {
  const auto a = gen_shapegrid(40, 5), b = gen_shapegrid(40, 5), big = gen_shapegrid(80, 5);
  for (std::size_t i = 0; i < 40; ++i) {
    CHECK(item_json(a.samples[i].item).dump() == item_json(b.samples[i].item).dump());
    CHECK(item_json(a.samples[i].item).dump() == item_json(big.samples[i].item).dump());
  }
  CHECK(rasterize(a.samples[3].grid).pixels == rasterize(b.samples[3].grid).pixels);
  CHECK(item_json(gen_shapegrid(1, 6).samples[0].item).dump() != item_json(a.samples[0].item).dump());
  CHECK_THROWS_AS(gen_shapegrid(0, 0), ValidationError);
  CHECK_THROWS_AS(gen_sudoku(0, 0), ValidationError);
}

TEST_CASE("write_dataset layout and byte-identical regeneration") {
  const auto ds = gen_sudoku(6, 2);
  const fs::path d1 = scratch("a"), d2 = scratch("b");
  write_dataset(ds, d1);
  write_dataset(gen_sudoku(6, 2), d2);
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(d1)) {
    if (!e.is_regular_file()) continue;
    ++files;
    CHECK(slurp(e.path()) == slurp(d2 / fs::relative(e.path(), d1)));
  }
  CHECK(files == 6 + 2);

  std::istringstream lines(slurp(d1 / "items.jsonl"));
  std::string line;
  std::size_t i = 0;
  for (; std::getline(lines, line); ++i) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.at("image") == "images/" + ds.samples[i].item.image_id + ".png");
    for (const char* key : {"task", "question", "answer", "meta"}) CHECK(j.contains(key));
    if (i == 0) CHECK(read_image(d1 / j.at("image").get<std::string>()).pixels == rasterize(ds.samples[0].grid).pixels);
  }
  CHECK(i == 6);
  const auto m = nlohmann::json::parse(slurp(d1 / "manifest.json"));
  CHECK(m.at("kind") == "sudoku");
  CHECK(m.at("seed") == 2);
  CHECK(m.at("count") == 6);
  CHECK(m.at("palette").size() == 7);
  CHECK(m.at("shapes").size() == 9);
  fs::remove_all(d1);
  fs::remove_all(d2);
}
