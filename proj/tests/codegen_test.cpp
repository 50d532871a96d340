#include <gtest/gtest.h>

#include "nyosh/codegen.hpp"
#include "nyosh/pretty.hpp"
#include "support.hpp"

using namespace nyosh;
namespace ts = testing_support;
namespace fs = std::filesystem;

namespace {

Script bwa_script() { return ts::parse_or_die(ts::read_file(ts::data_dir() / "bwa_aligner.nyosh")); }

BuildOptions bwa_options(const std::string& runner = "nyosh") {
  BuildOptions opt;
  opt.runner_path = runner;
  opt.config = load_plugin_config(ts::data_dir() / "bwa_plugin");
  opt.deploy = false;
  return opt;
}

// A runner that records its argv one per line.
fs::path stub_runner(const fs::path& dir) {
  fs::path p = dir / "stub-runner";
  ts::write_file(p, "#!/bin/sh\nfor a in \"$@\"; do printf '%s\\n' \"$a\"; done\n");
  fs::permissions(p, fs::perms::owner_all);
  return p;
}

}  // namespace

TEST(Codegen, PackageFiles) {
  PluginPackage pkg = render_package(bwa_script(), bwa_options());
  std::vector<std::string> names;
  for (const auto& [n, c] : pkg.files) names.push_back(n);
  EXPECT_EQ(names, (std::vector<std::string>{"manifest.xml", "run_model.sh", "script.nyosh", "script.sh"}));
  EXPECT_NE(pkg.files["script.sh"].find("function plugin_align {\n"), std::string::npos);
  EXPECT_EQ(ts::parse_or_die(pkg.files["script.nyosh"]), bwa_script());
  EXPECT_EQ(parse_plugin_config(pkg.files["manifest.xml"]), *bwa_options().config);
}

TEST(Codegen, Deterministic) {
  ts::TempDir a, b;
  build_package(bwa_script(), a.path(), bwa_options());
  build_package(bwa_script(), b.path(), bwa_options());
  for (const char* f : {"manifest.xml", "run_model.sh", "script.nyosh", "script.sh"})
    EXPECT_EQ(ts::read_file(a / f), ts::read_file(b / f)) << f;
  EXPECT_EQ(render_package(bwa_script(), bwa_options()).files, render_package(bwa_script(), bwa_options()).files);
}

TEST(Codegen, WrapperForwardsEntryAndArgs) {
  ts::TempDir dir;
  fs::path runner = stub_runner(dir.path());
  fs::path out = dir / "pkg";
  build_package(bwa_script(), out, bwa_options(runner.string()));
  std::string cmd = "JOB_DIR=" + ts::sh_quote(out.string()) + " bash -c " +
                    ts::sh_quote(". \"$JOB_DIR/script.sh\"; plugin_align 'out file' 'base'");
  auto r = ts::run_shell(cmd);
  EXPECT_EQ(r.status, 0);
  EXPECT_EQ(r.out, "run\n" + (out / "script.nyosh").string() + "\nplugin_align\nout file\nbase\n");
}

TEST(Codegen, ContractViolationRejected) {
  Script s = bwa_script();
  s.entry_points[0].params.pop_back();
  EXPECT_THROW(render_package(s, bwa_options()), BuildError);
}

TEST(Codegen, HeaderRequired) {
  Script s = bwa_script();
  s.header.reset();
  EXPECT_THROW(render_package(s, bwa_options()), BuildError);
}

TEST(Codegen, ConfigMustMatchHeader) {
  BuildOptions opt = bwa_options();
  opt.config->id = "OTHER";
  EXPECT_THROW(render_package(bwa_script(), opt), BuildError);
}

TEST(Codegen, DeploysIntoExistingLocation) {
  ts::TempDir loc, out;
  Script s = bwa_script();
  s.header->location = loc.path().string();
  BuildOptions opt = bwa_options();
  opt.deploy = true;
  PluginPackage pkg = build_package(s, out.path(), opt);
  ASSERT_TRUE(pkg.deployed_to);
  EXPECT_EQ(*pkg.deployed_to, loc.path() / "plugins" / "aligner" / "BWA_GOBY_ARTIFACT_NYOSH");
  EXPECT_TRUE(fs::exists(*pkg.deployed_to / "script.sh"));
}

TEST(Codegen, NoDeployWhenLocationMissing) {
  ts::TempDir out;
  PluginPackage pkg = build_package(bwa_script(), out.path(), [] {
    BuildOptions o = bwa_options();
    o.deploy = true;
    return o;
  }());
  EXPECT_FALSE(pkg.deployed_to);
}

TEST(Codegen, DumpPlan) {
  RuntimeEnvironment env;
  AssembleContext ctx;
  ctx.env = &env;
  ExecuteCommand x{{Command{make_literal_gstring("echo a")}}};
  EXPECT_NE(dump_plan(x, ctx).find("\"argv\""), std::string::npos);
}
