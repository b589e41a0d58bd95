// Copyright 2026 The Shepherd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "shepherd/evalharness.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

const fs::path& workdir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "shepherd_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Run run(const std::string& args) {
  const fs::path out = workdir() / "stdout.txt";
  const std::string cmd = std::string(SHEPHERD_CLI) + " " + args + " > " + out.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out)};
}

int count_lines(const std::string& s) {
  int n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

}  // namespace

TEST_CASE("games lists the twelve canonical games") {
  const Run r = run("games");
  CHECK(r.code == 0);
  CHECK(count_lines(r.out) == 12);
  const Run pd = run("games --name PrisonersDilemma");
  CHECK(pd.code == 0);
  CHECK(pd.out.find("R=-1 S=-3 T=0 P=-2") != std::string::npos);
  CHECK(run("games --name Tennis").code == 2);
}

TEST_CASE("usage errors exit with code 2") {
  CHECK(run("train --env game:Tennis --out " + (workdir() / "x.json").string()).code == 2);
  CHECK(run("train --env game:PrisonersDilemma --method sgd").code == 2);
  CHECK(run("frobnicate").code == 2);
  CHECK(run("eval").code == 2);
}

TEST_CASE("training twice gives byte-identical checkpoints") {
  const std::string common = " --env game:PrisonersDilemma --outer-steps 20 --inner-steps 5 --seed 3";
  const fs::path a = workdir() / "a.json", b = workdir() / "b.json";
  const Run ra = run("train" + common + " --out " + a.string());
  REQUIRE(ra.code == 0);
  CHECK(ra.out.find("final mean inner return") != std::string::npos);
  REQUIRE(run("train" + common + " --out " + b.string()).code == 0);
  CHECK(slurp(a) == slurp(b));
  CHECK(slurp(workdir() / "a_history.csv") == slurp(workdir() / "b_history.csv"));
  CHECK(count_lines(slurp(workdir() / "a_history.csv")) == 21);

  const Run insp = run("inspect " + a.string());
  CHECK(insp.code == 0);
  CHECK(insp.out.find("PrisonersDilemma") != std::string::npos);
}

TEST_CASE("eval with one seed writes zero standard errors") {
  const fs::path ckpt = workdir() / "e.json";
  REQUIRE(run("train --env game:StagHunt --outer-steps 5 --inner-steps 3 --out " + ckpt.string()).code == 0);
  const fs::path dir = workdir() / "eval";
  const Run r = run("eval --checkpoint " + ckpt.string() + " --baselines --seeds 1 --steps 4 --out-dir " +
                    dir.string());
  REQUIRE(r.code == 0);
  CHECK(r.out.find("IO-Loop") != std::string::npos);
  CHECK(r.out.find("TitForTat") != std::string::npos);
  const fs::path csv = dir / "StagHunt_IO-Loop_1.csv";
  REQUIRE(fs::exists(csv));
  const auto curves = shepherd::load_curves(csv);
  REQUIRE(curves.size() == 1);
  CHECK(curves[0].std_error.isZero());
  CHECK(curves[0].returns.cols() == 4);
}

TEST_CASE("a corrupt checkpoint exits with code 3") {
  const fs::path bad = workdir() / "bad.json";
  std::ofstream(bad) << "{\"format\": \"shepherd-checkpoint\", \"version\": ";
  CHECK(run("inspect " + bad.string()).code == 3);
  CHECK(run("eval --checkpoint " + bad.string()).code == 3);
  CHECK(run("inspect " + (workdir() / "missing.json").string()).code == 3);
}
