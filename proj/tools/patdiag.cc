// Copyright 2026 The patdiag Authors
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


// patdiag <stage> --config <file> [--seed N]
//         [--annotations <journal> | --oracle | --serve --port P]

#include <csignal>
#include <iostream>

#include "CLI11.hpp"
#include "patdiag/pipeline/config.h"
#include "patdiag/pipeline/pipeline.h"
#include "patdiag/pipeline/server.h"
#include "patdiag/util/io.h"

namespace {

using namespace patdiag;
using namespace patdiag::pipeline;

AnnotationService* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
}

int serve(Pipeline& p, const std::string& host, int port, const std::string& ui_dir) {
  p.refine({AnnotationSource::None, {}});
  if (p.refine_done()) {
    std::cout << "session already finalized: " << p.session_dir().string() << "\n";
    return 0;
  }
  AnnotationService service(refinement::SessionStore::open(p.session_dir()), p.load_train(), ui_dir);
  const int bound = service.bind(host, port);
  g_service = &service;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << "annotation service on http://" << host << ":" << bound << "  (session "
            << p.session_dir().string() << ")" << std::endl;
  service.serve();
  g_service = nullptr;
  if (p.refine_done()) p.refine({AnnotationSource::None, {}});
  return 0;
}

void print_outputs(const StageResult& r) {
  const auto show = [&](const char* name) {
    const auto path = r.dir / name;
    if (std::filesystem::exists(path)) std::cout << util::read_file(path);
  };
  switch (r.stage) {
    case Stage::Eval: show("eval.txt"); break;
    case Stage::Report: show("report.txt"); break;
    case Stage::Diagnose: show("diagnosis.txt"); break;
    default: break;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diagnose and repair distantly supervised relation labels"};

  std::string stage_name;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  std::string journal;
  bool oracle = false;
  bool serve_flag = false;
  int port = 8080;
  std::string host = "127.0.0.1";
  std::string ui_dir;

  const std::string stages = "ingest, synth, train-nre, extract, refine, fuse, retrain, eval, report, diagnose, all";
  app.add_option("stage", stage_name, "One of: " + stages + "; or 'defaults' to print the default config")
      ->required();
  app.add_option("--config,-c", config_path, "Config file (key = value lines)");
  app.add_option("--seed", seed, "Overrides the config seed");
  app.add_option("--set", overrides, "key=value override, repeatable");
  auto* ann = app.add_option("--annotations", journal, "Replay a label journal (refine)");
  auto* orc = app.add_flag("--oracle", oracle, "Label with gold labels (refine)");
  auto* srv = app.add_flag("--serve", serve_flag, "Start the HTTP annotation service (refine)");
  app.add_option("--port", port, "Service port")->needs(srv);
  app.add_option("--host", host, "Service address")->needs(srv);
  app.add_option("--ui-dir", ui_dir, "Static files served at /")->needs(srv);
  ann->excludes(orc)->excludes(srv);
  orc->excludes(srv);

  CLI11_PARSE(app, argc, argv);

  try {
    PipelineConfig config;
    if (stage_name == "defaults") {
      std::cout << config_text(config);
      return 0;
    }
    if (!config_path.empty()) config = load_config(config_path);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      set_value(config, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed) config.seed = *seed;
    config.validate();

    RefineOptions refine;
    if (oracle) refine.source = AnnotationSource::Oracle;
    if (!journal.empty()) refine = {AnnotationSource::Journal, journal};

    Pipeline p(config, &std::cerr);
    if (stage_name == "all") {
      for (const auto& r : p.run_all(refine)) {
        std::cerr << to_string(r.stage) << (r.skipped ? ": up to date " : ": done ") << r.dir.string() << "\n";
        print_outputs(r);
      }
      return 0;
    }
    const Stage stage = stage_from_string(stage_name);
    if (serve_flag) {
      if (stage != Stage::Refine) throw PipelineError("--serve only applies to refine");
      return serve(p, host, port, ui_dir);
    }
    if ((oracle || !journal.empty()) && stage != Stage::Refine)
      throw PipelineError("--oracle and --annotations only apply to refine");
    const StageResult r = p.run(stage, refine);
    if (stage == Stage::Refine && !p.refine_done()) {
      std::cerr << "refine: session ready in " << r.dir.string()
                << "; label it with --serve, --oracle or --annotations\n";
      return 0;
    }
    std::cerr << to_string(r.stage) << (r.skipped ? ": up to date " : ": done ") << r.dir.string() << "\n";
    print_outputs(r);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
