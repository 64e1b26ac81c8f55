#include "puupl/runlog.hpp"

#include <iomanip>

namespace puupl {

namespace {

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> optional_from(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

void RunLog::write_epochs_csv(std::ostream& out) const {
  out << "iteration,epoch,loss_total,loss_pu,loss_pl,val_score,best_score,val_ece\n";
  const auto old = out.precision(17);
  for (const auto& e : epochs) {
    out << e.iteration << ',' << e.epoch << ',' << e.loss_total << ',' << e.loss_pu << ','
        << e.loss_pl << ',' << e.val_score << ',' << e.best_score << ',';
    if (e.val_ece) out << *e.val_ece;
    out << '\n';
  }
  out.precision(old);
}

nlohmann::json to_json(const IterationOutcome& o) {
  return {{"iteration", o.iteration},
          {"epochs_run", o.epochs_run},
          {"n_selected", o.n_selected},
          {"n_newly_labeled", o.n_newly_labeled},
          {"n_unlabeled_back", o.n_unlabeled_back},
          {"val_score", o.val_score},
          {"best_score", o.best_score},
          {"pl_accuracy", optional_json(o.pl_accuracy)},
          {"pl_nll", optional_json(o.pl_nll)},
          {"size_p", o.size_p},
          {"size_u", o.size_u},
          {"size_l", o.size_l}};
}

void RunLog::write_iterations_jsonl(std::ostream& out) const {
  for (const auto& o : iterations) out << puupl::to_json(o).dump() << '\n';
}

nlohmann::json RunLog::to_json() const {
  nlohmann::json ep = nlohmann::json::array();
  for (const auto& e : epochs)
    ep.push_back({{"iteration", e.iteration},
                  {"epoch", e.epoch},
                  {"loss_total", e.loss_total},
                  {"loss_pu", e.loss_pu},
                  {"loss_pl", e.loss_pl},
                  {"val_score", e.val_score},
                  {"best_score", e.best_score},
                  {"val_ece", optional_json(e.val_ece)}});
  nlohmann::json it = nlohmann::json::array();
  for (const auto& o : iterations) it.push_back(puupl::to_json(o));
  return {{"epochs", ep}, {"iterations", it}};
}

RunLog RunLog::from_json(const nlohmann::json& j) {
  RunLog log;
  for (const auto& e : j.at("epochs")) {
    EpochRecord r;
    r.iteration = e.at("iteration").get<std::size_t>();
    r.epoch = e.at("epoch").get<std::size_t>();
    r.loss_total = e.at("loss_total").get<double>();
    r.loss_pu = e.at("loss_pu").get<double>();
    r.loss_pl = e.at("loss_pl").get<double>();
    r.val_score = e.at("val_score").get<double>();
    r.best_score = e.at("best_score").get<double>();
    r.val_ece = optional_from(e.at("val_ece"));
    log.epochs.push_back(r);
  }
  for (const auto& o : j.at("iterations")) {
    IterationOutcome r;
    r.iteration = o.at("iteration").get<std::size_t>();
    r.epochs_run = o.at("epochs_run").get<std::size_t>();
    r.n_selected = o.at("n_selected").get<std::size_t>();
    r.n_newly_labeled = o.at("n_newly_labeled").get<std::size_t>();
    r.n_unlabeled_back = o.at("n_unlabeled_back").get<std::size_t>();
    r.val_score = o.at("val_score").get<double>();
    r.best_score = o.at("best_score").get<double>();
    r.pl_accuracy = optional_from(o.at("pl_accuracy"));
    r.pl_nll = optional_from(o.at("pl_nll"));
    r.size_p = o.at("size_p").get<std::size_t>();
    r.size_u = o.at("size_u").get<std::size_t>();
    r.size_l = o.at("size_l").get<std::size_t>();
    log.iterations.push_back(r);
  }
  return log;
}

}  // namespace puupl
