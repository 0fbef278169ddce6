#include "l3x/scene.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace l3x {

namespace fs = std::filesystem;

namespace {

// Whitespace tokenizer that reports the file and line of any malformed field.
class LineReader {
 public:
  explicit LineReader(const fs::path& path) : path_(path.string()), in_(path) {
    if (!in_) throw Error("cannot open " + path_);
  }

  // Next non-comment line; blank lines are returned only when keep_blank is set.
  bool next(std::string& line, bool keep_blank = false) {
    while (std::getline(in_, line)) {
      ++line_no_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      std::size_t first = line.find_first_not_of(" \t");
      if (first == std::string::npos) {
        if (keep_blank) return true;
        continue;
      }
      if (line[first] == '#') continue;
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(path_, line_no_, what); }
  int line() const { return line_no_; }

 private:
  std::string path_;
  std::ifstream in_;
  int line_no_ = 0;
};

std::vector<std::string_view> split(const std::string& line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.emplace_back(line.data() + i, j - i);
    i = j;
  }
  return out;
}

template <class T>
T parse_number(const LineReader& r, std::string_view s, const char* field) {
  T v{};
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    r.fail(std::string("malformed ") + field + " '" + std::string(s) + "'");
  return v;
}

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

struct Intrinsics {
  CameraModel model;
  int width, height;
  double fx, fy, cx, cy;
};

}  // namespace

Scene ingest_colmap(const fs::path& cameras_path, const fs::path& images_path, const fs::path& points_path,
                    const ColmapOptions& options) {
  std::map<int, Intrinsics> intrinsics;
  {
    LineReader r(cameras_path);
    std::string line;
    while (r.next(line)) {
      auto tok = split(line);
      if (tok.size() < 4) r.fail("expected CAMERA_ID MODEL WIDTH HEIGHT PARAMS[]");
      int id = parse_number<int>(r, tok[0], "camera id");
      std::string model(tok[1]);
      Intrinsics in{};
      in.width = parse_number<int>(r, tok[2], "width");
      in.height = parse_number<int>(r, tok[3], "height");
      if (model == "PINHOLE") {
        if (tok.size() != 8) r.fail("PINHOLE expects 4 parameters");
        in.model = CameraModel::Pinhole;
        in.fx = parse_number<double>(r, tok[4], "fx");
        in.fy = parse_number<double>(r, tok[5], "fy");
        in.cx = parse_number<double>(r, tok[6], "cx");
        in.cy = parse_number<double>(r, tok[7], "cy");
      } else if (model == "SIMPLE_PINHOLE") {
        if (tok.size() != 7) r.fail("SIMPLE_PINHOLE expects 3 parameters");
        in.model = CameraModel::SimplePinhole;
        in.fx = in.fy = parse_number<double>(r, tok[4], "f");
        in.cx = parse_number<double>(r, tok[5], "cx");
        in.cy = parse_number<double>(r, tok[6], "cy");
      } else {
        throw UnsupportedModelError(cameras_path.string() + ":" + std::to_string(r.line()) +
                                    ": unsupported camera model " + model +
                                    " (only PINHOLE and SIMPLE_PINHOLE are supported)");
      }
      intrinsics[id] = in;
    }
  }

  Scene scene;
  {
    LineReader r(images_path);
    std::string line;
    while (r.next(line)) {
      auto tok = split(line);
      if (tok.size() != 10) r.fail("expected IMAGE_ID QW QX QY QZ TX TY TZ CAMERA_ID NAME");
      Camera cam;
      cam.id = parse_number<int>(r, tok[0], "image id");
      Vec4<double> q;
      for (int k = 0; k < 4; ++k) q(k) = parse_number<double>(r, tok[1 + k], "quaternion");
      for (int k = 0; k < 3; ++k) cam.t(k) = parse_number<double>(r, tok[5 + k], "translation");
      cam.set_rotation(q);
      cam.intrinsics_id = parse_number<int>(r, tok[8], "camera id");
      cam.name = std::string(tok[9]);
      auto it = intrinsics.find(cam.intrinsics_id);
      if (it == intrinsics.end()) r.fail("image references unknown camera " + std::to_string(cam.intrinsics_id));
      cam.model = it->second.model;
      cam.width = it->second.width;
      cam.height = it->second.height;
      cam.fx = it->second.fx;
      cam.fy = it->second.fy;
      cam.cx = it->second.cx;
      cam.cy = it->second.cy;
      cam.appearance_index = int(scene.cameras.size());

      if (!r.next(line, true)) r.fail("missing POINTS2D line");
      auto pts = split(line);
      if (pts.size() % 3 != 0) r.fail("POINTS2D must be triples X Y POINT3D_ID");
      for (std::size_t k = 0; k < pts.size(); k += 3) {
        Observation o;
        o.x = parse_number<double>(r, pts[k], "keypoint x");
        o.y = parse_number<double>(r, pts[k + 1], "keypoint y");
        o.point3d_id = parse_number<std::int64_t>(r, pts[k + 2], "point3D id");
        cam.observations.push_back(o);
      }
      cam.validate();
      scene.cameras.push_back(std::move(cam));
    }
  }

  {
    LineReader r(points_path);
    std::string line;
    while (r.next(line)) {
      auto tok = split(line);
      if (tok.size() < 8 || (tok.size() - 8) % 2 != 0)
        r.fail("expected POINT3D_ID X Y Z R G B ERROR TRACK[] as (IMAGE_ID, POINT2D_IDX)");
      Point3D p;
      p.id = parse_number<std::int64_t>(r, tok[0], "point3D id");
      for (int k = 0; k < 3; ++k) p.xyz(k) = parse_number<double>(r, tok[1 + k], "coordinate");
      for (int k = 0; k < 3; ++k) {
        int c = parse_number<int>(r, tok[4 + k], "color");
        if (c < 0 || c > 255) r.fail("color out of range");
        p.rgb[k] = std::uint8_t(c);
      }
      p.error = parse_number<double>(r, tok[7], "error");
      for (std::size_t k = 8; k < tok.size(); k += 2) {
        TrackElement t;
        t.image_id = parse_number<int>(r, tok[k], "track image id");
        t.point2d_index = parse_number<int>(r, tok[k + 1], "track point2D index");
        p.track.push_back(t);
      }
      scene.points.push_back(std::move(p));
    }
  }

  scene.validate();
  scene.gaussians = seed_gaussians(scene.points, options.feature_dim);
  return scene;
}

Scene ingest_colmap_dir(const fs::path& dir, const ColmapOptions& options) {
  return ingest_colmap(dir / "cameras.txt", dir / "images.txt", dir / "points3D.txt", options);
}

void write_colmap(const Scene& scene, const fs::path& dir) {
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "cameras.txt");
    out << "# Camera list with one line of data per camera:\n"
        << "#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n";
    std::map<int, const Camera*> seen;
    for (const auto& c : scene.cameras) seen.emplace(c.intrinsics_id, &c);
    for (const auto& [id, c] : seen) {
      out << id << ' ';
      if (c->model == CameraModel::SimplePinhole) {
        out << "SIMPLE_PINHOLE " << c->width << ' ' << c->height << ' ' << fmt(c->fx) << ' ' << fmt(c->cx) << ' '
            << fmt(c->cy) << '\n';
      } else {
        out << "PINHOLE " << c->width << ' ' << c->height << ' ' << fmt(c->fx) << ' ' << fmt(c->fy) << ' '
            << fmt(c->cx) << ' ' << fmt(c->cy) << '\n';
      }
    }
  }
  {
    std::ofstream out(dir / "images.txt");
    out << "# Image list with two lines of data per image:\n"
        << "#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n"
        << "#   POINTS2D[] as (X, Y, POINT3D_ID)\n";
    for (const auto& c : scene.cameras) {
      out << c.id;
      for (int k = 0; k < 4; ++k) out << ' ' << fmt(c.qvec(k));
      for (int k = 0; k < 3; ++k) out << ' ' << fmt(c.t(k));
      out << ' ' << c.intrinsics_id << ' ' << c.name << '\n';
      for (std::size_t k = 0; k < c.observations.size(); ++k) {
        const auto& o = c.observations[k];
        if (k) out << ' ';
        out << fmt(o.x) << ' ' << fmt(o.y) << ' ' << o.point3d_id;
      }
      out << '\n';
    }
  }
  {
    std::ofstream out(dir / "points3D.txt");
    out << "# 3D point list with one line of data per point:\n"
        << "#   POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as (IMAGE_ID, POINT2D_IDX)\n";
    for (const auto& p : scene.points) {
      out << p.id << ' ' << fmt(p.xyz.x()) << ' ' << fmt(p.xyz.y()) << ' ' << fmt(p.xyz.z()) << ' ' << int(p.rgb[0])
          << ' ' << int(p.rgb[1]) << ' ' << int(p.rgb[2]) << ' ' << fmt(p.error);
      for (const auto& t : p.track) out << ' ' << t.image_id << ' ' << t.point2d_index;
      out << '\n';
    }
  }
}

}  // namespace l3x
