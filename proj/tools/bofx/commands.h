#pragma once

#include <optional>
#include <string>
#include <vector>

#include "settings.h"

namespace bofx::cli {

struct Paths {
  std::string data;
  std::string codebooks;
  std::string features;
  std::string models;
  std::string explanations;
  std::string metrics;
  std::string cases;
  std::string tsne;
  std::string out;
  std::string out_dir;
};

struct ExplainTarget {
  std::string well;
  std::string time;
  std::string type = "Stuck";
  std::string method = "shap";
  std::optional<double> m_percent;
  double threshold = 0.5;
  std::string case_out;
};

struct TsneTarget {
  std::string type = "Stuck";
  std::vector<std::string> channels;
};

extern bool g_quiet;

void cmd_gen(const Settings& s, const Paths& p);
void cmd_train_codebooks(const Settings& s, const Paths& p);
void cmd_featurize(const Settings& s, const Paths& p);
void cmd_train_gbm(const Settings& s, const Paths& p, const std::vector<std::string>& types);
void cmd_train_fcmh(const Settings& s, const Paths& p, const std::vector<std::string>& types);
void cmd_predict(const Settings& s, const Paths& p);
void cmd_explain(const Settings& s, const Paths& p, const ExplainTarget& target);
void cmd_evaluate(const Settings& s, const Paths& p);
void cmd_tsne(const Settings& s, const Paths& p, const TsneTarget& target);
void cmd_report(const Settings& s, const Paths& p);

}  // namespace bofx::cli
