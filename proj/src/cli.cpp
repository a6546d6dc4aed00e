#include "polysketch/cli.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "polysketch/cluster.hpp"
#include "polysketch/csv.hpp"
#include "polysketch/data.hpp"
#include "polysketch/error.hpp"
#include "polysketch/eval.hpp"
#include "polysketch/io.hpp"
#include "polysketch/knnpp.hpp"
#include "polysketch/project.hpp"
#include "polysketch/tinynn/gradcheck.hpp"
#include "polysketch/tinynn/train.hpp"

namespace polysketch::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum class Format { csv, json };

Format file_format(const fs::path& path, std::initializer_list<Format> allowed) {
  const auto ext = path.extension().string();
  std::optional<Format> format;
  if (ext == ".csv") format = Format::csv;
  if (ext == ".json") format = Format::json;
  if (!format) throw ValidationError(path.string() + ": output format is ambiguous; use a .csv or .json extension");
  if (std::find(allowed.begin(), allowed.end(), *format) == allowed.end())
    throw ValidationError(path.string() + ": " + ext + " output is not supported by this command");
  return *format;
}

void require_directory_target(const fs::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".csv" || ext == ".json")
    throw ValidationError(path.string() + ": this command writes a directory, not a " + ext + " file");
}

void ensure_parent(const fs::path& file) {
  if (!file.has_parent_path()) return;
  std::error_code ec;
  fs::create_directories(file.parent_path(), ec);
  if (ec) throw IoError("cannot create " + file.parent_path().string() + ": " + ec.message());
}

void write_json(const fs::path& file, const json& value) {
  ensure_parent(file);
  io::write_text(file, value.dump(2) + "\n");
}

// An embedding set, or one part of a directory written by `split`.
data::EmbeddingSet load_set(const fs::path& path, const std::string& split) {
  if (fs::is_directory(path) && !fs::exists(path / "meta.json") && !split.empty()) {
    if (fs::exists(path / split / "meta.json")) return data::load_embedding_set(path / split);
    throw IoError(path.string() + " holds neither meta.json nor a '" + split + "' split");
  }
  return data::load_any(path);
}

std::vector<double> parse_fractions(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      require(used == item.size(), "");
    } catch (const std::exception&) {
      throw ValidationError("cannot parse fraction '" + item + "'");
    }
  }
  return out;
}

std::uint32_t resolve_class(const std::string& text, const std::vector<std::string>& names) {
  for (std::size_t c = 0; c < names.size(); ++c)
    if (names[c] == text) return static_cast<std::uint32_t>(c);
  try {
    std::size_t used = 0;
    const auto value = std::stoul(text, &used);
    if (used == text.size() && value < names.size()) return static_cast<std::uint32_t>(value);
  } catch (const std::exception&) {
  }
  throw ValidationError("unknown class '" + text + "'");
}

json summarize_options(const CLI::App* sub) {
  json params = json::object();
  for (const CLI::Option* opt : sub->get_options()) {
    const auto name = opt->get_name(false, true);
    if (name.empty() || name == "--help" || name == "-h") continue;
    std::string value = opt->count() > 0 ? opt->as<std::string>() : opt->get_default_str();
    std::string key = opt->get_single_name();
    params[key] = value;
  }
  return params;
}

struct Manifest {
  std::vector<fs::path> inputs;
  std::vector<fs::path> outputs;
  std::optional<std::uint64_t> seed;
};

void write_manifest(const fs::path& target, bool target_is_dir, const std::vector<std::string>& args,
                    const CLI::App* sub, const Manifest& m, double seconds) {
  json inputs = json::array(), outputs = json::array();
  for (const auto& p : m.inputs) inputs.push_back(p.string());
  for (const auto& p : m.outputs) outputs.push_back(p.string());
  json manifest = {{"command", sub->get_name()},
                   {"argv", args},
                   {"parameters", summarize_options(sub)},
                   {"seed", m.seed ? json(*m.seed) : json(nullptr)},
                   {"inputs", inputs},
                   {"outputs", outputs},
                   {"toolkit_version", kToolkitVersion},
                   {"format_version", data::kFormatVersion},
                   {"wall_clock_seconds", seconds}};
  const fs::path file = target_is_dir ? target / "manifest.json" : fs::path(target.string() + ".manifest.json");
  write_json(file, manifest);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Embedding-space sketch classification toolkit", "polysketch"};
  app.require_subcommand(0, 1);
  bool show_version = false;
  app.add_flag("--version", show_version, "Print toolkit and file-format versions");

  std::string in_path, out_path, model_path, preds_path, class_text, method = "pca";
  std::string train_split = "train", test_split = "test";
  std::string metas_path, fracs = "0.8,0.1,0.1", top_n_text = "1,5,10", confusion_out, optimizer = "adam";
  std::uint64_t seed = 0;
  double threshold = data::kDefaultGuessThreshold, tol = 1e-6, epsilon = knnpp::kDefaultEpsilon;
  double perplexity = 30.0, lr = 1e-4, alpha = eval::kDefaultEmaAlpha, val_frac = 0.1, tolerance = 1e-4, step = 1e-5;
  std::size_t k_per_class = cluster::kDefaultCentroidsPerClass, restarts = 5, max_iters = 300;
  std::size_t top_m = cluster::kDefaultExemplarsPerCentroid, k_neighbors = knnpp::kDefaultNeighbors;
  std::size_t most_confused_m = eval::kDefaultMostConfused, iters = 1000, max_points = project::kDefaultTsneSubsample;
  std::size_t batch = 16, epochs = 35, base_filters = 16, blocks = 4, bins = data::kDefaultHistogramBins;
  std::size_t gc_size = 8, gc_filters = 2, gc_classes = 3, gc_blocks = 3, gc_batch = 4;

  auto* clean = app.add_subcommand("clean", "Drop rows whose guess rate is below a threshold");
  clean->add_option("in", in_path, "Embedding-set directory")->required();
  clean->add_option("out", out_path, "Output directory")->required();
  clean->add_option("--threshold", threshold, "Minimum guess rate kept")->capture_default_str();
  clean->add_option("--metas", metas_path, "Sample metadata CSV (default: <in>/meta_samples.csv)");

  auto* rebalance = app.add_subcommand("rebalance", "Up-sample every class to the largest class size");
  rebalance->add_option("in", in_path)->required();
  rebalance->add_option("out", out_path)->required();
  rebalance->add_option("--seed", seed)->capture_default_str();

  auto* split_cmd = app.add_subcommand("split", "Stratified train/val/test split");
  split_cmd->add_option("in", in_path)->required();
  split_cmd->add_option("out", out_path, "Directory receiving train/ val/ test/")->required();
  split_cmd->add_option("--fracs", fracs, "train,val,test fractions")->capture_default_str();
  split_cmd->add_option("--seed", seed)->capture_default_str();

  auto* histogram = app.add_subcommand("histogram", "Class-size histogram");
  histogram->add_option("in", in_path)->required();
  histogram->add_option("out", out_path, ".json or .csv report")->required();
  histogram->add_option("--bins", bins)->capture_default_str();

  auto* fit = app.add_subcommand("fit", "Fit per-class k-means++ centroids");
  fit->add_option("in", in_path)->required();
  fit->add_option("model_out", out_path)->required();
  fit->add_option("--k-per-class", k_per_class)->capture_default_str();
  fit->add_option("--restarts", restarts)->capture_default_str();
  fit->add_option("--max-iters", max_iters)->capture_default_str();
  fit->add_option("--tol", tol)->capture_default_str();
  fit->add_option("--seed", seed)->capture_default_str();
  fit->add_option("--split", train_split, "Part to use when <in> is a split directory")->capture_default_str();

  auto* silhouette_cmd = app.add_subcommand("silhouette", "Silhouette score with class labels as clusters");
  silhouette_cmd->add_option("in", in_path)->required();
  silhouette_cmd->add_option("report_out", out_path, ".csv per-point scores or .json summary")->required();
  silhouette_cmd->add_option("--split", train_split)->capture_default_str();

  auto* exemplars = app.add_subcommand("exemplars", "Rows nearest to each centroid of one class");
  exemplars->add_option("in", in_path)->required();
  exemplars->add_option("model", model_path)->required();
  exemplars->add_option("--class", class_text, "Class name or id")->required();
  exemplars->add_option("--top-m", top_m)->capture_default_str();
  exemplars->add_option("--out", out_path, ".csv or .json (default: CSV on stdout)");
  exemplars->add_option("--split", train_split)->capture_default_str();

  auto* classify = app.add_subcommand("classify", "Centroid-weighted voting classification");
  classify->add_option("in", in_path)->required();
  classify->add_option("model", model_path)->required();
  classify->add_option("out", out_path, "Predictions .csv")->required();
  classify->add_option("--k-neighbors", k_neighbors)->capture_default_str();
  classify->add_option("--epsilon", epsilon)->capture_default_str();
  classify->add_option("--split", test_split)->capture_default_str();

  auto* evaluate = app.add_subcommand("evaluate", "Top-N accuracy, confusion matrix and most-confused classes");
  evaluate->add_option("preds", preds_path)->required();
  evaluate->add_option("in", in_path, "Embedding set holding the true labels")->required();
  evaluate->add_option("out", out_path, "Report .json")->required();
  evaluate->add_option("--top-n", top_n_text)->capture_default_str();
  evaluate->add_option("--split", test_split)->capture_default_str();
  evaluate->add_option("--confusion-out", confusion_out, "Confusion matrix .csv (default: <out stem>.confusion.csv)");
  evaluate->add_option("--most-confused", most_confused_m)->capture_default_str();

  auto* project_cmd = app.add_subcommand("project", "2-D projection for plotting");
  project_cmd->add_option("in", in_path)->required();
  project_cmd->add_option("out", out_path, "Coordinates .csv")->required();
  project_cmd->add_option("--method", method)->check(CLI::IsMember({"pca", "tsne"}))->capture_default_str();
  project_cmd->add_option("--perplexity", perplexity)->capture_default_str();
  project_cmd->add_option("--iters", iters)->capture_default_str();
  project_cmd->add_option("--max-points", max_points)->capture_default_str();
  project_cmd->add_option("--seed", seed)->capture_default_str();
  project_cmd->add_option("--split", train_split)->capture_default_str();

  auto* train_cmd = app.add_subcommand("train", "Train the small CNN from scratch");
  train_cmd->add_option("data_dir", in_path, "Image dataset directory (or one with train/ and val/)")->required();
  train_cmd->add_option("ckpt_out", out_path)->required();
  train_cmd->add_option("--lr", lr)->capture_default_str();
  train_cmd->add_option("--batch", batch)->capture_default_str();
  train_cmd->add_option("--epochs", epochs)->capture_default_str();
  train_cmd->add_option("--seed", seed)->capture_default_str();
  train_cmd->add_option("--optimizer", optimizer)->check(CLI::IsMember({"adam", "sgd"}))->capture_default_str();
  train_cmd->add_option("--base-filters", base_filters)->capture_default_str();
  train_cmd->add_option("--blocks", blocks)->capture_default_str();
  train_cmd->add_option("--val-frac", val_frac, "Held-out share when data_dir has no val/")->capture_default_str();
  train_cmd->add_option("--ema-alpha", alpha)->capture_default_str();

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the CNN gradients");
  gradcheck->add_option("--seed", seed)->capture_default_str();
  gradcheck->add_option("--tolerance", tolerance)->capture_default_str();
  gradcheck->add_option("--step", step)->capture_default_str();
  gradcheck->add_option("--size", gc_size, "Input height and width")->capture_default_str();
  gradcheck->add_option("--base-filters", gc_filters)->capture_default_str();
  gradcheck->add_option("--classes", gc_classes)->capture_default_str();
  gradcheck->add_option("--blocks", gc_blocks)->capture_default_str();
  gradcheck->add_option("--batch", gc_batch)->capture_default_str();
  gradcheck->add_option("--out", out_path, "Report .json");

  auto* smooth = app.add_subcommand("smooth", "Exponential moving average of a step,value curve");
  smooth->add_option("in", in_path)->required();
  smooth->add_option("out", out_path)->required();
  smooth->add_option("--alpha", alpha)->capture_default_str();

  auto* replay = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
  replay->add_option("manifest", in_path)->required();

  // CLI11 consumes arguments from the back.
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << json{{"error", "usage"}, {"message", e.what()}}.dump() << "\n";
    return kValidationError;
  }
  // CLI11 leaves a subcommand's own --help to the caller.
  for (auto* sub : app.get_subcommands())
    if (sub->get_help_ptr() && sub->get_help_ptr()->count() > 0) {
      out << sub->help();
      return kOk;
    }

  if (show_version) {
    out << json{{"toolkit", kToolkitVersion},
                {"formats",
                 {{"embedding_set", data::kFormatVersion}, {"centroid_model", 1}, {"checkpoint", 1}, {"image_dataset", 1}}}}
               .dump()
        << "\n";
    return kOk;
  }
  if (app.get_subcommands().empty()) {
    out << app.help();
    return kValidationError;
  }
  CLI::App* sub = app.get_subcommands().front();

  const auto started = std::chrono::steady_clock::now();
  Manifest manifest;
  fs::path manifest_target;
  bool manifest_is_dir = false;
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  };

  try {
    if (sub == clean) {
      require_directory_target(out_path);
      const auto set = data::load_any(in_path);
      const fs::path metas_file = metas_path.empty() ? fs::path(in_path) / "meta_samples.csv" : fs::path(metas_path);
      const auto metas = data::load_sample_metas(metas_file);
      const auto cleaned = data::clean_by_guess_rate(set, metas, threshold);
      data::save_embedding_set(cleaned, out_path);
      const auto keep = data::rows_passing_guess_rate(metas, threshold);
      std::vector<data::SampleMeta> kept;
      for (auto r : keep) kept.push_back(metas[r]);
      data::save_sample_metas(kept, fs::path(out_path) / "meta_samples.csv");
      out << json{{"kept", cleaned.size()}, {"dropped", set.size() - cleaned.size()}}.dump() << "\n";
      manifest.inputs = {in_path, metas_file};
      manifest_target = out_path;
      manifest_is_dir = true;
    } else if (sub == rebalance) {
      require_directory_target(out_path);
      const auto set = data::load_any(in_path);
      const auto balanced = data::rebalance_classes(set, seed);
      data::save_embedding_set(balanced, out_path);
      out << json{{"rows_in", set.size()}, {"rows_out", balanced.size()}}.dump() << "\n";
      manifest.inputs = {in_path};
      manifest.seed = seed;
      manifest_target = out_path;
      manifest_is_dir = true;
    } else if (sub == split_cmd) {
      require_directory_target(out_path);
      const auto f = parse_fractions(fracs);
      require(f.size() == 3, "--fracs needs exactly three comma-separated values");
      const auto set = data::load_any(in_path);
      const auto parts = data::split(set, {f[0], f[1], f[2], seed});
      data::save_embedding_set(parts.train, fs::path(out_path) / "train");
      data::save_embedding_set(parts.val, fs::path(out_path) / "val");
      data::save_embedding_set(parts.test, fs::path(out_path) / "test");
      out << json{{"train", parts.train.size()}, {"val", parts.val.size()}, {"test", parts.test.size()}}.dump() << "\n";
      manifest.inputs = {in_path};
      manifest.seed = seed;
      manifest_target = out_path;
      manifest_is_dir = true;
    } else if (sub == histogram) {
      const auto format = file_format(out_path, {Format::json, Format::csv});
      const auto set = data::load_any(in_path);
      const auto hist = data::class_histogram(set, bins);
      ensure_parent(out_path);
      if (format == Format::json) {
        json jbins = json::array();
        for (const auto& b : hist.bins) jbins.push_back({{"lower", b.lower}, {"upper", b.upper}, {"classes", b.classes}});
        write_json(out_path, {{"class_counts", hist.counts}, {"bins", jbins}});
      } else {
        std::ofstream f(out_path, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot open for writing " + out_path);
        f << "lower,upper,classes\n";
        for (const auto& b : hist.bins)
          f << csv::format_double(b.lower) << ',' << csv::format_double(b.upper) << ',' << b.classes << '\n';
      }
      manifest.inputs = {in_path};
      manifest_target = out_path;
    } else if (sub == fit) {
      require_directory_target(out_path);
      const auto set = load_set(in_path, train_split);
      cluster::KMeansConfig config{k_per_class, max_iters, tol, restarts, seed};
      const auto model = cluster::fit_class_centroids(set, k_per_class, config);
      cluster::save_centroid_model(model, out_path);
      out << json{{"classes", model.num_classes()}, {"centroids", model.total_centroids()}, {"d", model.dim()}}.dump()
          << "\n";
      manifest.inputs = {in_path};
      manifest.seed = seed;
      manifest_target = out_path;
      manifest_is_dir = true;
    } else if (sub == silhouette_cmd) {
      const auto format = file_format(out_path, {Format::csv, Format::json});
      const auto set = load_set(in_path, train_split);
      const auto report = cluster::silhouette(set.to_matrix(), set.labels());
      ensure_parent(out_path);
      const json summary = {{"silhouette", report.overall}, {"samples", set.size()}, {"classes", set.num_classes()}};
      if (format == Format::csv)
        cluster::write_silhouette_csv(report, set.labels(), out_path);
      else
        write_json(out_path, summary);
      out << summary.dump() << "\n";
      manifest.inputs = {in_path};
      manifest_target = out_path;
    } else if (sub == exemplars) {
      const auto set = load_set(in_path, train_split);
      const auto model = cluster::load_centroid_model(model_path);
      const auto class_id = resolve_class(class_text, model.label_names());
      const auto lists = cluster::exemplars_near_centroids(set, model, class_id, top_m);
      if (out_path.empty()) {
        out << "class,centroid,rank,row,distance\n";
        for (const auto& ce : lists)
          for (std::size_t r = 0; r < ce.nearest.size(); ++r)
            out << class_id << ',' << ce.centroid << ',' << r << ',' << ce.nearest[r].row << ','
                << csv::format_double(ce.nearest[r].distance) << '\n';
      } else {
        const auto format = file_format(out_path, {Format::csv, Format::json});
        ensure_parent(out_path);
        if (format == Format::csv) {
          cluster::write_exemplars_csv(lists, class_id, out_path);
        } else {
          json centroids = json::array();
          for (const auto& ce : lists) {
            json rows = json::array();
            for (const auto& e : ce.nearest) rows.push_back({{"row", e.row}, {"distance", e.distance}});
            centroids.push_back(
                {{"centroid", ce.centroid}, {"assigned", ce.assigned}, {"truncated", ce.truncated}, {"nearest", rows}});
          }
          write_json(out_path, {{"class", class_id}, {"label", model.label_names()[class_id]}, {"centroids", centroids}});
        }
        manifest.inputs = {in_path, model_path};
        manifest_target = out_path;
      }
    } else if (sub == classify) {
      file_format(out_path, {Format::csv});
      const auto set = load_set(in_path, test_split);
      const auto model = cluster::load_centroid_model(model_path);
      const auto predictions = knnpp::classify_batch(set, model, {k_neighbors, epsilon});
      ensure_parent(out_path);
      knnpp::write_predictions_csv(predictions, out_path);
      out << json{{"queries", predictions.size()}}.dump() << "\n";
      manifest.inputs = {in_path, model_path};
      manifest_target = out_path;
    } else if (sub == evaluate) {
      file_format(out_path, {Format::json});
      const auto predictions = knnpp::read_predictions_csv(preds_path);
      const auto set = load_set(in_path, test_split);
      require(predictions.size() == set.size(), "predictions cover " + std::to_string(predictions.size()) +
                                                    " queries but the label set has " + std::to_string(set.size()));
      std::vector<std::size_t> cutoffs;
      for (double v : parse_fractions(top_n_text)) {
        require(v >= 1.0 && v == std::floor(v), "--top-n values must be positive integers");
        cutoffs.push_back(static_cast<std::size_t>(v));
      }
      const auto report = eval::accuracy_report(predictions, set.labels(), cutoffs);
      const auto matrix = eval::confusion_matrix(predictions, set.labels(), set.num_classes(), set.label_names());
      const auto confused =
          eval::most_confused(matrix, std::min(most_confused_m, static_cast<std::size_t>(set.num_classes())));
      const fs::path confusion_file =
          confusion_out.empty() ? fs::path(out_path).replace_extension(".confusion.csv") : fs::path(confusion_out);
      file_format(confusion_file, {Format::csv});
      ensure_parent(confusion_file);
      eval::write_confusion_csv(matrix, confusion_file);

      json top_n = json::object();
      for (const auto& [n, acc] : report.per_n) top_n[std::to_string(n)] = acc;
      json worst = json::array();
      for (auto c : confused)
        worst.push_back({{"class_id", c}, {"label", set.label_names()[c]}, {"recall", matrix.recall(c)}});
      const json result = {{"top_n", top_n}, {"samples", report.sample_count}, {"most_confused", worst},
                           {"split", test_split}, {"confusion_matrix", confusion_file.string()}};
      write_json(out_path, result);
      out << result.dump() << "\n";
      manifest.inputs = {preds_path, in_path};
      manifest.outputs = {confusion_file};
      manifest_target = out_path;
    } else if (sub == project_cmd) {
      file_format(out_path, {Format::csv});
      const auto full = load_set(in_path, train_split);
      json info;
      project::Projection2D projection;
      if (method == "pca") {
        auto result = project::pca2(full);
        info = {{"method", "pca"}, {"explained_variance", result.projection.objective},
                {"rank_deficient", result.rank_deficient}};
        projection = std::move(result.projection);
      } else {
        const auto rows = project::subsample_rows(full.size(), max_points, seed);
        const auto set = rows.size() == full.size() ? full : full.select(rows);
        project::TsneConfig config;
        config.perplexity = perplexity;
        config.iterations = iters;
        config.seed = seed;
        auto result = project::tsne2(set, config);
        info = {{"method", "tsne"}, {"kl_initial", result.initial_kl}, {"kl_final", result.final_kl},
                {"points", set.size()}, {"subsampled", rows.size() != full.size()},
                {"unconverged_rows", result.unconverged_rows}};
        projection = std::move(result.projection);
      }
      ensure_parent(out_path);
      project::write_projection_csv(projection, out_path);
      out << info.dump() << "\n";
      manifest.inputs = {in_path};
      manifest.seed = seed;
      manifest_target = out_path;
    } else if (sub == train_cmd) {
      require_directory_target(out_path);
      tinynn::ImageDataset train_set, val_set;
      const fs::path root = in_path;
      if (fs::exists(root / "train" / "index.json") && fs::exists(root / "val" / "index.json")) {
        train_set = tinynn::load_image_dataset(root / "train");
        val_set = tinynn::load_image_dataset(root / "val");
      } else {
        require(val_frac > 0.0 && val_frac < 1.0, "--val-frac must lie in (0, 1)");
        const auto all = tinynn::load_image_dataset(root);
        const double fractions[] = {1.0 - val_frac, val_frac};
        const auto parts = data::stratified_partition(all.labels, fractions, seed);
        require(!parts[0].empty() && !parts[1].empty(), "dataset too small for a train/val split");
        train_set = all.subset(parts[0]);
        val_set = all.subset(parts[1]);
      }
      tinynn::CnnConfig arch{train_set.channels, train_set.height,           train_set.width,
                             base_filters,       train_set.label_names.size(), blocks};
      tinynn::TrainConfig config{lr, batch, epochs, seed, tinynn::parse_optimizer(optimizer)};
      const auto result = tinynn::train(tinynn::kaiming_model<float>(arch, seed), train_set, val_set, config);
      tinynn::save_checkpoint(result.best, out_path);
      const fs::path dir = out_path;
      eval::write_series_csv(result.train_loss, dir / "train_loss.csv", "step", "loss");
      eval::write_series_csv(eval::ema_smooth(result.train_loss, alpha), dir / "train_loss_ema.csv", "step", "loss");
      eval::write_series_csv(result.val_loss, dir / "val_loss.csv", "epoch", "val_loss", 1);
      out << json{{"best_epoch", result.best.epoch}, {"best_val_loss", result.best.val_loss},
                  {"epochs_run", result.val_loss.size()}}
                 .dump()
          << "\n";
      manifest.inputs = {in_path};
      manifest.seed = seed;
      manifest_target = out_path;
      manifest_is_dir = true;
    } else if (sub == gradcheck) {
      tinynn::CnnConfig arch{3, gc_size, gc_size, gc_filters, gc_classes, gc_blocks};
      const auto model = tinynn::kaiming_model<double>(arch, seed);
      Rng rng(seed + 1);
      tinynn::Tensor4<double> x(gc_batch, arch.in_channels, gc_size, gc_size);
      for (auto& v : x.values()) v = rng.uniform01();
      std::vector<std::uint32_t> labels(gc_batch);
      for (auto& l : labels) l = static_cast<std::uint32_t>(rng.uniform_index(gc_classes));
      const auto report = tinynn::grad_check(model, x, labels, step, tolerance);
      json tensors = json::array();
      for (const auto& t : report.tensors)
        tensors.push_back({{"name", t.name}, {"count", t.count}, {"max_relative_error", t.max_relative_error},
                           {"max_absolute_error", t.max_absolute_error}});
      const json result = {{"passed", report.passed}, {"max_relative_error", report.max_relative_error},
                           {"tolerance", tolerance}, {"step", step}, {"tensors", tensors}};
      out << result.dump() << "\n";
      if (!out_path.empty()) {
        file_format(out_path, {Format::json});
        write_json(out_path, result);
        manifest.seed = seed;
        manifest_target = out_path;
      }
      if (!report.passed) {
        err << json{{"error", "gradcheck"}, {"message", "gradient check failed"}}.dump() << "\n";
        return kValidationError;
      }
    } else if (sub == smooth) {
      file_format(out_path, {Format::csv});
      const auto series = eval::read_series_csv(in_path);
      ensure_parent(out_path);
      eval::write_series_csv(eval::ema_smooth(series, alpha), out_path, "step", "value");
      manifest.inputs = {in_path};
      manifest_target = out_path;
    } else if (sub == replay) {
      json m;
      try {
        m = json::parse(io::read_text(in_path));
      } catch (const json::exception& e) {
        throw ValidationError(in_path + ": " + e.what());
      }
      require(m.contains("argv") && m["argv"].is_array(), in_path + ": manifest has no argv");
      const auto argv = m["argv"].get<std::vector<std::string>>();
      require(!argv.empty() && argv.front() != "replay", in_path + ": manifest does not record a replayable command");
      return run(argv, out, err);
    }
  } catch (const ValidationError& e) {
    err << json{{"error", "validation"}, {"message", e.what()}}.dump() << "\n";
    return kValidationError;
  } catch (const IoError& e) {
    err << json{{"error", "io"}, {"message", e.what()}}.dump() << "\n";
    return kIoError;
  } catch (const std::exception& e) {
    err << json{{"error", "internal"}, {"message", e.what()}}.dump() << "\n";
    return kValidationError;
  }

  if (!manifest_target.empty()) {
    manifest.outputs.insert(manifest.outputs.begin(), manifest_target);
    try {
      write_manifest(manifest_target, manifest_is_dir, args, sub, manifest, elapsed());
    } catch (const IoError& e) {
      err << json{{"error", "io"}, {"message", e.what()}}.dump() << "\n";
      return kIoError;
    }
  }
  return kOk;
}

}  // namespace polysketch::cli
