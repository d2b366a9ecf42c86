#include <catch_amalgamated.hpp>

#include <sys/wait.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cwseg/rng.hpp"
#include "cwseg/vgf.hpp"

namespace fs = std::filesystem;
using namespace cwseg;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(CWSEG_BINARY) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf;
  std::size_t got;
  while ((got = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), got);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

const fs::path kFixtures = CWSEG_FIXTURES;

// Random 3-class labels with a solid block and matching soft predictions.
void write_loss_inputs(const fs::path& dir) {
  Rng rng(5);
  const Dims d(12, 12, 12);
  std::vector<std::uint8_t> raw(d.voxels(), 0);
  for (std::size_t z = 1; z < 11; ++z)
    for (std::size_t y = 1; y < 11; ++y)
      for (std::size_t x = 1; x < 7; ++x) raw[d.index(z, y, x)] = 1;
  for (std::size_t z = 2; z < 5; ++z) raw[d.index(z, 2, 10)] = 2;
  const LabelVolume labels(d, raw, 3);
  std::vector<double> p(3 * d.voxels());
  for (std::size_t i = 0; i < d.voxels(); ++i) {
    double s = 0.0;
    for (int c = 0; c < 3; ++c) s += p[c * d.voxels() + i] = static_cast<float>(rng.uniform(0.05, 1.0));
    for (int c = 0; c < 3; ++c) p[c * d.voxels() + i] = static_cast<float>(p[c * d.voxels() + i] / s);
  }
  io::write_volume_file(dir / "truth.vgf", io::from_labels(labels));
  io::write_volume_file(dir / "pred.vgf", io::from_probs(ProbVolume(d, 3, p)));
  io::write_volume_file(dir / "perfect.vgf", io::from_probs(one_hot_probs(labels)));
  io::write_volume_file(dir / "small.vgf",
                        io::from_probs(one_hot_probs(LabelVolume(Dims(2, 2, 2), std::vector<std::uint8_t>(8, 1), 3))));
}

nlohmann::json loss_json(const fs::path& dir, const std::string& pred, const std::string& extra) {
  const Run r = run("loss-eval --pred " + q(dir / pred) + " --truth " + q(dir / "truth.vgf") +
                    " --json " + extra);
  INFO(r.out);
  REQUIRE(r.code == 0);
  return nlohmann::json::parse(r.out);
}

}  // namespace

TEST_CASE("usage errors exit with code 2", "[cli]") {
  CHECK(run("").code == 2);
  CHECK(run("frobnicate").code == 2);
  CHECK(run("extract-contour").code == 2);
  CHECK(run("extract-contour --in x --out y --boundary wrap").code == 2);
  CHECK(run("extract-contour --in " + q(kFixtures / "cube9.labels.vgf") + " --out /tmp/x.vgf --class blob").code == 2);
  CHECK(run("extract-contour --in " + q(kFixtures / "cube9.labels.vgf") + " --out /tmp/x.vgf --kernel 4").code == 2);
  CHECK(run("gradcheck --trials 0").code == 2);
  CHECK(run("--help").code == 0);
}

TEST_CASE("extract-contour on the cube fixture", "[cli]") {
  TempDir tmp("cwseg_cli_contour");
  const Run r = run("extract-contour --in " + q(kFixtures / "cube9.labels.vgf") + " --out " +
                    q(tmp.path / "c.vgf") + " --iterations 1");
  INFO(r.out);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("class 1: object 343 interior 125 contour 218") != std::string::npos);
  const LabelVolume c = io::to_labels(io::read_volume_file(tmp.path / "c.vgf"));
  CHECK(c.count(1) == 218);

  const Run one = run("extract-contour --in " + q(kFixtures / "cube9.labels.vgf") + " --out " +
                      q(tmp.path / "c1.vgf") + " --iterations 1 --class 1");
  REQUIRE(one.code == 0);
  const io::VolumeFile mask = io::read_volume_file(tmp.path / "c1.vgf");
  std::size_t ones = 0;
  for (auto b : mask.payload) ones += b;
  CHECK(ones == 218);

  const Run bg = run("extract-contour --in " + q(kFixtures / "background8.labels.vgf") + " --out " +
                     q(tmp.path / "bg.vgf"));
  REQUIRE(bg.code == 0);
  CHECK(bg.out.find("all: object 0 interior 0 contour 0") != std::string::npos);
  for (auto b : io::read_volume_file(tmp.path / "bg.vgf").payload) CHECK(b == 0);

  CHECK(run("extract-contour --in " + q(tmp.path / "missing.vgf") + " --out " + q(tmp.path / "x.vgf")).code == 1);
  std::ofstream(tmp.path / "bad.vgf") << "{\"magic\":\"VGF1\"\n";
  CHECK(run("extract-contour --in " + q(tmp.path / "bad.vgf") + " --out " + q(tmp.path / "x.vgf")).code == 1);
}

TEST_CASE("loss-eval reports and identities", "[cli]") {
  TempDir tmp("cwseg_cli_loss");
  write_loss_inputs(tmp.path);

  const auto cwcd = loss_json(tmp.path, "pred.vgf", "--variant CWCD --iterations 2");
  for (const char* key : {"variant", "total", "dice_term", "contour_term", "noncontour_term", "sdl_term",
                          "ce_term", "per_class_dice", "per_class_contour", "per_class_noncontour",
                          "skipped_classes", "gradient"})
    CHECK(cwcd.contains(key));
  CHECK(cwcd["gradient"].is_null());

  const auto sdl = loss_json(tmp.path, "pred.vgf", "--variant SDL --iterations 2");
  const auto cwce = loss_json(tmp.path, "pred.vgf", "--variant CWCE --iterations 2");
  CHECK(std::fabs(cwcd["total"].get<double>() - (sdl["total"].get<double>() + cwce["total"].get<double>())) <= 1e-9);
  CHECK(sdl["sdl_term"].get<double>() ==
        (sdl["contour_term"].get<double>() + sdl["noncontour_term"].get<double>()) / 2.0);

  const auto grad = loss_json(tmp.path, "pred.vgf", "--variant DL --gradient");
  CHECK(grad["gradient"].size() == 3 * 12 * 12 * 12);

  for (const char* v : {"CE", "CWCE", "DL", "SDL", "CWCD", "CEDL"}) {
    const auto perfect = loss_json(tmp.path, "perfect.vgf", std::string("--variant ") + v);
    INFO(v);
    CHECK(perfect["total"].get<double>() < 1e-2);
  }

  const Run text = run("loss-eval --pred " + q(tmp.path / "pred.vgf") + " --truth " + q(tmp.path / "truth.vgf"));
  CHECK(text.code == 0);
  CHECK(text.out.find("sdl_term:") != std::string::npos);

  CHECK(run("loss-eval --pred " + q(tmp.path / "pred.vgf") + " --truth " + q(tmp.path / "truth.vgf") +
            " --variant BOGUS").code == 2);
  CHECK(run("loss-eval --pred " + q(tmp.path / "small.vgf") + " --truth " + q(tmp.path / "truth.vgf")).code == 1);
  CHECK(run("loss-eval --pred " + q(tmp.path / "truth.vgf") + " --truth " + q(tmp.path / "truth.vgf")).code == 1);
}

TEST_CASE("gradcheck command", "[cli]") {
  const Run a = run("gradcheck --trials 2");
  const Run b = run("gradcheck --trials 2");
  CHECK(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(a.out.find("PASS") != std::string::npos);
  const Run fail = run("gradcheck --trials 1 --tol 0");
  CHECK(fail.code == 1);
  CHECK(fail.out.find("FAIL") != std::string::npos);
}

TEST_CASE("phantom, train and eval pipeline", "[cli]") {
  TempDir tmp("cwseg_cli_train");
  const fs::path data = tmp.path / "data";
  REQUIRE(run("phantom --out " + q(data) + " --count 3 --seed 2").code == 0);
  CHECK(fs::exists(data / "vol_000.image.vgf"));
  CHECK(fs::exists(data / "vol_002.labels.vgf"));
  const auto manifest = nlohmann::json::parse(read_text(data / "manifest.json"));
  CHECK(manifest["volumes"].size() == 3);

  const fs::path model0 = tmp.path / "m0.bin", log0 = tmp.path / "t0.log";
  REQUIRE(run("train --data " + q(data) + " --epochs 0 --out " + q(model0) + " --log " + q(log0)).code == 0);
  CHECK(read_text(log0).empty());
  const Run ev0 = run("eval --model " + q(model0) + " --data " + q(data) + " --csv " + q(tmp.path / "m0.csv"));
  CHECK(ev0.code == 0);
  const std::string csv0 = read_text(tmp.path / "m0.csv");
  CHECK(csv0.rfind("volume_id,class_id,class_name,dsc,loss_variant,contour_gain,lambda,iterations\n", 0) == 0);
  CHECK(csv0.find("vol_001,2,shell,") != std::string::npos);

  const fs::path model = tmp.path / "m.bin", log = tmp.path / "t.log";
  const std::string train_args = "train --data " + q(data) + " --epochs 22 --out " + q(model) + " --log " + q(log);
  REQUIRE(run(train_args).code == 0);
  std::vector<nlohmann::json> lines;
  {
    std::istringstream in(read_text(log));
    for (std::string line; std::getline(in, line);) lines.push_back(nlohmann::json::parse(line));
  }
  REQUIRE(lines.size() == 22);
  CHECK(lines[19]["lr"].get<double>() == 3e-4);
  CHECK(lines[20]["lr"].get<double>() == 1.5e-4);
  CHECK(lines[0]["variant"] == "CWCD");
  const std::string first_log = read_text(log);
  REQUIRE(run(train_args).code == 0);
  CHECK(read_text(log) == first_log);

  CHECK(run("eval --model " + q(model) + " --data " + q(data) + " --csv " + q(tmp.path / "m.csv")).code == 0);
  CHECK(run("eval --model " + q(tmp.path / "none.bin") + " --data " + q(data)).code == 1);
  CHECK(run("train --data " + q(tmp.path / "nowhere") + " --epochs 1").code == 1);
  CHECK(run("train --data " + q(data) + " --variant NOPE").code == 2);
}
