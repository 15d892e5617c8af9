// SPDX-License-Identifier: Apache-2.0
#include "earlydrop/experiment.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <sstream>

#include "earlydrop/checkpoint.hpp"
#include "earlydrop/diagnostics.hpp"
#include "earlydrop/error.hpp"
#include "earlydrop/optimizers.hpp"
#include "earlydrop/rng.hpp"
#include "earlydrop/schedules.hpp"
#include "earlydrop/text_io.hpp"

namespace earlydrop {

namespace fs = std::filesystem;

namespace {

constexpr const char *kMetricsHeader = "iteration,epoch,lr,drop_rate,train_loss,grad_norm";
constexpr const char *kEvalHeader =
    "epoch,iteration,train_loss,train_accuracy,test_loss,test_accuracy,model_distance";

std::uint64_t sub_seed(std::uint64_t seed, StreamTag tag) {
  return stream_id({seed, static_cast<std::uint64_t>(tag)});
}

std::string csv_row(std::initializer_list<std::string> cells) {
  std::string s;
  bool first = true;
  for (const auto &c : cells) {
    if (!first) s += ',';
    s += c;
    first = false;
  }
  return s + "\n";
}

std::string fmt(double v) { return format_double(v); }
std::string fmt(std::int64_t v) { return std::to_string(v); }

} // namespace

std::size_t env_thread_count() {
  if (const char *v = std::getenv("EARLYDROP_THREADS")) {
    const long n = std::strtol(v, nullptr, 10);
    if (n > 0) return static_cast<std::size_t>(n);
  }
  return 1;
}

std::int64_t iterations_per_epoch(std::size_t n, std::size_t batch_size) {
  return static_cast<std::int64_t>((n + batch_size - 1) / batch_size);
}

DatasetPair load_experiment_data(const ExperimentConfig &c) {
  if (!c.train_path.empty()) {
    DatasetPair p{load_dataset(c.train_path), load_dataset(c.test_path)};
    if (p.train.input_dim() != p.test.input_dim() || p.train.n_classes != p.test.n_classes)
      throw ValidationError("train and test datasets disagree on dimensions");
    if (c.batch_size > p.train.size())
      throw ValidationError("train.batch_size exceeds the training set size");
    return p;
  }
  return generate(c.data);
}

ModelConfig resolve_model_config(const ExperimentConfig &c, const Dataset &train) {
  ModelConfig m = c.model;
  m.input_dim = train.input_dim();
  m.output_dim = train.n_classes;
  m.init_seed = sub_seed(c.seed, StreamTag::init);
  m.validate();
  return m;
}

std::string summary_to_text(const RunSummary &s) {
  std::ostringstream o;
  o << "final_train_loss=" << format_double(s.final_train_loss) << "\n"
    << "final_test_loss=" << format_double(s.final_test_loss) << "\n"
    << "final_test_accuracy=" << format_double(s.final_test_accuracy) << "\n"
    << "gde_auc_early=" << format_double(s.gde_auc_early) << "\n"
    << "final_model_distance=" << format_double(s.final_model_distance) << "\n"
    << "seed=" << s.seed << "\n"
    << "iterations=" << s.iterations << "\n"
    << "config_digest=" << s.config_digest << "\n";
  return o.str();
}

RunSummary summarize_run(const std::string &dir) {
  const fs::path root(dir);
  const std::string config_text = read_text_file((root / "config.txt").string());
  const ExperimentConfig cfg = ExperimentConfig::from_keys(KeyValues::parse(config_text));
  const CsvTable eval = CsvTable::load((root / "eval.csv").string());
  if (eval.rows.empty()) throw ValidationError(dir + ": eval.csv has no rows");

  RunSummary s;
  s.final_train_loss = eval.numbers("train_loss").back();
  s.final_test_loss = eval.numbers("test_loss").back();
  s.final_test_accuracy = eval.numbers("test_accuracy").back();
  s.final_model_distance = eval.numbers("model_distance").back();
  s.iterations = static_cast<std::int64_t>(eval.numbers("iteration").back());
  s.seed = cfg.seed;
  s.config_digest = fnv1a_hex(config_text);
  s.gde_auc_early = std::numeric_limits<double>::quiet_NaN();

  const fs::path diag = root / "diagnostics.csv";
  if (fs::exists(diag)) {
    const CsvTable d = CsvTable::load(diag.string());
    const auto it = d.numbers("iteration");
    const auto g = d.numbers("gde");
    std::vector<std::pair<std::int64_t, double>> series;
    for (std::size_t i = 0; i < it.size(); ++i)
      if (std::isfinite(g[i])) series.emplace_back(static_cast<std::int64_t>(it[i]), g[i]);
    try {
      s.gde_auc_early = gde_auc(series, cfg.diag.auc_window);
    } catch (const ValidationError &) {
      // Too few diagnostic points inside the window.
    }
  }
  return s;
}

void restore_parameters(Model &model, const ParameterVector &ckpt) {
  auto dst = model.parameters().values();
  for (std::size_t s = 0; s < model.parameters().segment_count(); ++s) {
    const Segment &seg = model.parameters().segments()[s];
    const std::size_t idx = ckpt.find(seg.name);
    if (ckpt.segments()[idx].shape != seg.shape)
      throw ValidationError("checkpoint segment " + seg.name + " has the wrong shape");
    auto src = ckpt.segment_values(idx);
    std::copy(src.begin(), src.end(), dst.begin() + static_cast<std::ptrdiff_t>(seg.offset));
  }
}

RunSummary run_experiment(const ExperimentConfig &config, const std::string &out_dir,
                          const RunOptions &options) {
  (void)config.validate();
  const DatasetPair data = load_experiment_data(config);
  const Dataset &train = data.train;
  const ModelConfig model_cfg = resolve_model_config(config, train);
  if (config.batch_size > train.size())
    throw ValidationError("train.batch_size exceeds the training set size");

  fs::create_directories(out_dir);
  const fs::path root(out_dir);
  write_text_file((root / "config.txt").string(), config.to_keys().serialize());

  Model model(model_cfg);
  const std::vector<double> initial(model.parameters().values().begin(),
                                    model.parameters().values().end());
  OptimizerState opt(config.opt, model.parameters().total_len());

  const std::int64_t ipe = iterations_per_epoch(train.size(), config.batch_size);
  const auto total_epochs = static_cast<double>(config.epochs);
  const LrConfig lr_cfg = config.lr_config();
  const std::uint64_t order_seed = sub_seed(config.seed, StreamTag::data_order);
  const Rng mask_rng(config.seed, stream_id({static_cast<std::uint64_t>(StreamTag::dropout)}));
  const std::uint64_t diag_seed = sub_seed(config.seed, StreamTag::diagnostics);
  const EvalOptions eval_opts{config.diag.chunk_size, options.threads, {}};
  const std::size_t diag_batch =
      config.diag.batch_size == 0 ? config.batch_size : config.diag.batch_size;

  std::size_t start_epoch = 0;
  if (!options.resume_from.empty()) {
    const ParameterVector ckpt = load_checkpoint(options.resume_from);
    restore_parameters(model, ckpt);
    opt = unpack_optimizer_state(ckpt, config.opt, model.parameters().total_len());
    start_epoch = static_cast<std::size_t>(ckpt.segment_values(ckpt.find("train.epochs_done"))[0]);
  }

  const std::string metrics_path = (root / "metrics.csv").string();
  const std::string eval_path = (root / "eval.csv").string();
  const std::string diag_path = (root / "diagnostics.csv").string();
  write_text_file(metrics_path, std::string(kMetricsHeader) + "\n");
  write_text_file(eval_path, std::string(kEvalHeader) + "\n");
  if (config.diag.enabled) write_text_file(diag_path, std::string(kDiagnosticsHeader) + "\n");
  fs::remove(root / "failure.txt");

  std::string metrics_buf, diag_buf;
  auto flush = [&] {
    append_text_file(metrics_path, metrics_buf);
    metrics_buf.clear();
    if (config.diag.enabled) {
      append_text_file(diag_path, diag_buf);
      diag_buf.clear();
    }
  };

  std::int64_t it = static_cast<std::int64_t>(start_epoch) * ipe;
  for (std::size_t epoch = start_epoch; epoch < config.epochs; ++epoch) {
    const auto batches = minibatch_indices(train.size(), config.batch_size, order_seed, epoch);
    for (const auto &idx : batches) {
      const double epoch_pos = static_cast<double>(it) / static_cast<double>(ipe);
      const double rate = drop_rate_at(config.drop, epoch_pos, total_epochs);
      const double lr = lr_at(lr_cfg, it, ipe);
      DropRates rates;
      (config.drop.target == DropTarget::dropout ? rates.dropout : rates.depth) = rate;

      try {
        const bool diag_due = config.diag.enabled && config.diag.cadence.due(it);
        DiagnosticsRecord rec;
        if (diag_due) {
          EvalOptions full_opts = eval_opts;
          full_opts.rates = rates;
          const GradientVector full = whole_dataset_gradient(model, train, full_opts);
          CollectOptions co;
          co.k = config.diag.k;
          co.batch_size = diag_batch;
          co.mode = Mode::train;
          co.rates = rates;
          co.seed = diag_seed;
          co.checkpoint = it;
          co.threads = options.threads;
          const GradientSet set = collect_minibatch_gradients(model, train, co);
          const bool usable = set.size() >= 2 && gradient_norm(full.values) > 0.0;
          rec.gdv = usable ? gdv(set) : std::numeric_limits<double>::quiet_NaN();
          rec.gde = usable ? gde(set, full) : std::numeric_limits<double>::quiet_NaN();
          rec.bias_norm = set.size() > 0 ? bias_norm(set, full)
                                         : std::numeric_limits<double>::quiet_NaN();
          rec.model_distance = model_distance(model.parameters().values(), initial);
        }

        ForwardOptions fo;
        fo.mode = Mode::train;
        fo.rates = rates;
        fo.rng = mask_rng.fork({static_cast<std::uint64_t>(it)});
        fo.iteration = it;
        auto pass = model.forward(gather(train, idx), fo);
        const double loss = pass.loss();
        const GradientVector g = backward(pass);
        const double gnorm = gradient_norm(g.values);

        metrics_buf += csv_row({fmt(it), fmt(epoch_pos), fmt(lr), fmt(rate), fmt(loss), fmt(gnorm)});
        if (diag_due) {
          rec.iteration = it;
          rec.epoch = epoch_pos;
          rec.lr = lr;
          rec.drop_rate = rate;
          rec.train_loss = loss;
          rec.grad_norm = gnorm;
          diag_buf += csv_row({fmt(rec.iteration), fmt(rec.epoch), fmt(rec.lr),
                               fmt(rec.drop_rate), fmt(rec.train_loss), fmt(rec.grad_norm),
                               fmt(rec.model_distance), fmt(rec.gdv), fmt(rec.gde),
                               fmt(rec.bias_norm)});
        }
        optimizer_step(model.parameters().values(), opt, g.values, lr, it);
      } catch (const NonFiniteError &e) {
        flush();
        write_text_file((root / "failure.txt").string(),
                        "iteration=" + std::to_string(it) + "\nmessage=" + e.what() + "\n");
        throw NonFiniteError(e.what(), it);
      }
      ++it;
    }

    const bool last = epoch + 1 == config.epochs;
    if (last || (epoch + 1) % config.eval_every == 0) {
      // The eval network matches the rates in effect at this point.
      EvalOptions end_opts = eval_opts;
      const double rate_now =
          drop_rate_at(config.drop, static_cast<double>(it) / static_cast<double>(ipe), total_epochs);
      (config.drop.target == DropTarget::dropout ? end_opts.rates.dropout
                                                 : end_opts.rates.depth) = rate_now;
      const EvalResult tr = evaluate(model, train, end_opts);
      const EvalResult te = evaluate(model, data.test, end_opts);
      if (!std::isfinite(tr.loss) || !std::isfinite(te.loss)) {
        flush();
        write_text_file((root / "failure.txt").string(),
                        "iteration=" + std::to_string(it) + "\nmessage=eval loss not finite\n");
        throw NonFiniteError("evaluation loss is not finite", it);
      }
      append_text_file(eval_path,
                       csv_row({std::to_string(epoch + 1), fmt(it), fmt(tr.loss), fmt(tr.accuracy),
                                fmt(te.loss), fmt(te.accuracy),
                                fmt(model_distance(model.parameters().values(), initial))}));
    }
    flush();

    for (std::size_t ce : config.checkpoint_epochs) {
      if (ce != epoch + 1) continue;
      ParameterVector ckpt = model.parameters();
      pack_optimizer_state(opt, ckpt);
      ckpt.add_segment("train.epochs_done", {1},
                       std::vector<double>{static_cast<double>(epoch + 1)});
      save_checkpoint(ckpt, (root / ("checkpoint_epoch" + std::to_string(epoch + 1) + ".ddck")).string());
    }
  }

  RunSummary summary = summarize_run(out_dir);
  write_text_file((root / "summary.txt").string(), summary_to_text(summary));
  return summary;
}

} // namespace earlydrop
