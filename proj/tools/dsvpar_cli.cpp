// dsvpar: parse, validate, infer, gen, bench.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dsvpar/dsvpar.hpp"

namespace {

using namespace dsvpar;

enum Exit : int { kOk = 0, kDataError = 1, kUsage = 2, kIo = 3 };

struct Common {
  std::string input = "-";
  std::string dialect = "csv";
  std::string encoding = "ascii";
  std::size_t chunk_size = kDefaultChunkSize;
  std::string mode = "auto";
  std::string terminator = "0x1f";
  std::size_t partition_size = kDefaultPartitionSize;
  std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  bool strict = false;
  bool permissive = false;
  std::string columns;
  std::string skip_rows;
  std::string skip_records;
  std::string schema;
  bool infer = false;
  std::string engine = "parallel";
  std::size_t big_field_threshold = 4096;
};

void add_common(CLI::App& app, Common& c) {
  app.add_option("input", c.input, "input file, '-' for stdin")->capture_default_str();
  app.add_option("--dialect", c.dialect, "csv, tsv, or a DFA spec JSON file")->capture_default_str();
  app.add_option("--encoding", c.encoding, "ascii|utf8|utf16le|utf16be")->capture_default_str();
  app.add_option("--chunk-size", c.chunk_size, "bytes per chunk, 1-64")->capture_default_str();
  app.add_option("--mode", c.mode, "auto|tagged|inline|delimited")->capture_default_str();
  app.add_option("--terminator", c.terminator, "inline field terminator byte (char or 0xNN)")->capture_default_str();
  app.add_option("--partition-size", c.partition_size, "streaming partition bytes")->capture_default_str();
  app.add_option("--workers", c.workers, "worker threads")->capture_default_str();
  auto* strict = app.add_flag("--strict", c.strict, "abort on malformed input or conversion errors");
  app.add_flag("--permissive", c.permissive, "null out bad fields and records (default)")->excludes(strict);
  app.add_option("--columns", c.columns, "projection, e.g. 2,0");
  app.add_option("--skip-rows", c.skip_rows, "raw line numbers to drop, e.g. 0,5");
  app.add_option("--skip-records", c.skip_records, "record indices to drop");
  auto* schema = app.add_option("--schema", c.schema, "schema JSON file");
  app.add_flag("--infer", c.infer, "infer column count and types (default)")->excludes(schema);
  app.add_option("--engine", c.engine, "parallel|sequential")->capture_default_str();
  app.add_option("--big-field-threshold", c.big_field_threshold, "fields longer than this convert in parallel")
      ->capture_default_str();
}

std::vector<std::uint64_t> parse_list(const std::string& s, const char* what) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (item.empty()) continue;
    std::size_t used = 0;
    try {
      out.push_back(std::stoull(item, &used));
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw ConfigError(std::string("bad ") + what + " entry '" + item + "'");
  }
  return out;
}

std::uint8_t parse_byte(const std::string& s) {
  if (s.size() == 1) return static_cast<std::uint8_t>(s[0]);
  if (s == "\\t") return '\t';
  std::size_t used = 0;
  unsigned long v = 0;
  try {
    v = std::stoul(s, &used, 0);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || v > 255) throw ConfigError("bad byte value '" + s + "'");
  return static_cast<std::uint8_t>(v);
}

Dialect make_dialect(const std::string& name) {
  if (name == "csv" || name == "rfc4180") return Dialect(build_csv_dialect(',', '"', '\n'));
  if (name == "tsv") return Dialect(build_csv_dialect('\t', '"', '\n'));
  if (name == "psv") return Dialect(build_csv_dialect('|', '"', '\n'));
  if (name == "ssv") return Dialect(build_csv_dialect(';', '"', '\n'));
  return Dialect(load_spec_file(name));
}

ParseOptions make_options(const Common& c) {
  ParseOptions o;
  const auto enc = parse_encoding(c.encoding);
  if (!enc) throw ConfigError("unknown encoding '" + c.encoding + "'");
  o.encoding = *enc;
  o.chunk_size = c.chunk_size;
  const auto mode = parse_mode(c.mode);
  if (!mode) throw ConfigError("unknown mode '" + c.mode + "'");
  o.mode = *mode;
  o.terminator = parse_byte(c.terminator);
  o.workers = c.workers;
  o.strict = c.strict;
  o.big_field_threshold = c.big_field_threshold;
  o.skip_rows = parse_list(c.skip_rows, "--skip-rows");
  std::sort(o.skip_rows.begin(), o.skip_rows.end());
  o.skip_rows.erase(std::unique(o.skip_rows.begin(), o.skip_rows.end()), o.skip_rows.end());
  o.selection.skip_records = parse_list(c.skip_records, "--skip-records");
  std::sort(o.selection.skip_records.begin(), o.selection.skip_records.end());
  o.selection.skip_records.erase(std::unique(o.selection.skip_records.begin(), o.selection.skip_records.end()),
                                 o.selection.skip_records.end());
  if (!c.columns.empty()) {
    std::vector<std::uint32_t> cols;
    for (auto v : parse_list(c.columns, "--columns")) cols.push_back(static_cast<std::uint32_t>(v));
    o.selection.columns = cols;
  }
  if (c.engine != "parallel" && c.engine != "sequential") throw ConfigError("unknown engine '" + c.engine + "'");
  validate_options(o);
  return o;
}

std::optional<Schema> make_schema(const Common& c) {
  if (c.schema.empty()) return std::nullopt;
  std::ifstream in(c.schema);
  if (!in) throw IoError("cannot open schema '" + c.schema + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_schema(ss.str());
}

std::vector<std::uint8_t> read_all(const std::string& path) {
  std::vector<std::uint8_t> out;
  std::unique_ptr<FileSource> f =
      path == "-" ? std::make_unique<FileSource>(stdin) : std::make_unique<FileSource>(path);
  std::vector<std::uint8_t> buf(std::size_t{1} << 20);
  for (std::size_t k; (k = f->read(buf.data(), buf.size())) > 0;) out.insert(out.end(), buf.begin(), buf.begin() + k);
  return out;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

class Output {
 public:
  explicit Output(const std::string& path) {
    if (path != "-") {
      file_.open(path, std::ios::binary);
      if (!file_) throw IoError("cannot open output '" + path + "'");
    }
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }
  void write(std::string_view bytes) {
    stream().write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    stream().flush();
    if (!stream()) throw IoError("write failed");
  }

 private:
  std::ofstream file_;
};

void print_stages(const StageTimes& t, std::ostream& os) {
  os << "stages(s): read=" << t.read << " parse=" << t.parse << " scan=" << t.scan << " tag=" << t.tag
     << " partition=" << t.partition << " convert=" << t.convert << " write=" << t.write << " wall=" << t.wall
     << '\n';
}

void print_diag(const Diagnostics& d, std::ostream& os) {
  os << "records=" << d.records << " invalid_records=" << d.invalid_records
     << " conversion_errors=" << d.conversion_errors;
  if (d.column_stats.any()) os << " columns_min=" << d.column_stats.min << " columns_max=" << d.column_stats.max;
  if (d.first_invalid_offset) os << " first_invalid_byte=" << *d.first_invalid_offset;
  os << " mode=" << mode_name(d.mode_used) << '\n';
}

struct ParseRun {
  Table table;
  Diagnostics diag;
  StageTimes times;
};

// Runs the selected engine over the whole input into one table.
ParseRun run_engine(const Common& c, const ParseOptions& opt, const Dialect& dialect,
                    const std::optional<Schema>& schema) {
  ParseRun run;
  if (c.engine == "sequential") {
    const auto start = std::chrono::steady_clock::now();
    const auto bytes = read_all(c.input);
    auto res = sequential_parse(bytes, dialect.spec, opt, schema);
    run.table = std::move(res.table);
    run.diag = res.diag;
    run.times.wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return run;
  }
  std::unique_ptr<FileSource> src =
      c.input == "-" ? std::make_unique<FileSource>(stdin) : std::make_unique<FileSource>(c.input);
  StreamConfig cfg;
  cfg.parse = opt;
  cfg.partition_size = c.partition_size;
  cfg.schema = schema;
  TableSink sink;
  auto stats = run_pipeline(*src, sink, dialect, cfg);
  run.table = std::move(sink.table());
  run.diag = stats.diag;
  run.times = stats.times;
  return run;
}

int cmd_parse(const Common& c, const std::string& out_path, const std::string& format, bool quiet) {
  const auto opt = make_options(c);
  const auto dialect = make_dialect(c.dialect);
  const auto schema = make_schema(c);
  if (format != "pprw" && format != "csv") throw ConfigError("unknown format '" + format + "'");
  Output out(out_path);
  auto run = run_engine(c, opt, dialect, schema);
  {
    const auto start = std::chrono::steady_clock::now();
    out.write(format == "csv" ? to_csv(run.table) : to_container(run.table));
    run.times.write += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  if (!quiet) {
    print_diag(run.diag, std::cerr);
    print_stages(run.times, std::cerr);
  }
  return kOk;
}

int cmd_validate(const Common& c, std::optional<std::uint32_t> expected) {
  auto opt = make_options(c);
  const auto dialect = make_dialect(c.dialect);
  auto schema = make_schema(c);
  if (schema && !expected) expected = static_cast<std::uint32_t>(schema->size());
  auto run = run_engine(c, opt, dialect, schema);
  print_diag(run.diag, std::cout);
  int rc = kOk;
  if (run.diag.invalid_records || run.diag.first_invalid_offset) {
    std::cout << "malformed input";
    if (run.diag.first_invalid_offset) std::cout << " at byte " << *run.diag.first_invalid_offset;
    std::cout << '\n';
    rc = kDataError;
  }
  if (expected) {
    const auto v = validate_column_count(run.diag.column_stats, *expected);
    if (!v.pass) {
      std::cout << "column count check failed (" << v.reason << "): expected " << *expected << ", found min "
                << v.stats.min << " max " << v.stats.max << '\n';
      if (c.input != "-") {
        auto bytes = read_all(c.input);
        WorkerPool pool(opt.workers);
        if (!opt.skip_rows.empty()) bytes = prune_rows(bytes, opt.encoding, opt.skip_rows, pool);
        const auto detail = check_column_count(bytes, dialect, opt, *expected, pool);
        for (std::size_t i = 0; i < detail.offenders.size() && i < 10; ++i) {
          std::cout << "  record " << detail.offenders[i].first_record << " has " << detail.offenders[i].columns
                    << " columns\n";
        }
      }
      rc = kDataError;
    }
  }
  if (run.diag.conversion_errors) rc = kDataError;
  std::cout << (rc == kOk ? "OK" : "FAILED") << '\n';
  return rc;
}

int cmd_infer(const Common& c, std::optional<std::uint32_t> expected) {
  const auto opt = make_options(c);
  const auto dialect = make_dialect(c.dialect);
  nlohmann::json doc;
  Schema schema;
  ColumnCountStats counts;
  std::uint64_t records = 0;
  if (c.engine == "sequential") {
    const auto bytes = read_all(c.input);
    auto res = sequential_parse(bytes, dialect.spec, opt);
    for (const auto& col : res.table.columns) schema.push_back(col.schema);
    counts = res.diag.column_stats;
    records = res.diag.records;
  } else {
    std::unique_ptr<FileSource> src =
        c.input == "-" ? std::make_unique<FileSource>(stdin) : std::make_unique<FileSource>(c.input);
    StreamConfig cfg;
    cfg.parse = opt;
    cfg.partition_size = c.partition_size;
    auto inf = infer_stream(*src, dialect, cfg);
    schema = std::move(inf.schema);
    counts = inf.column_stats;
    records = inf.records;
  }
  doc["columns"] = schema_to_json(schema);
  doc["records"] = records;
  doc["column_count"] = {{"min", counts.any() ? counts.min : 0}, {"max", counts.any() ? counts.max : 0}};
  int rc = kOk;
  if (expected) {
    const auto v = validate_column_count(counts, *expected);
    doc["validation"] = {{"expected", *expected}, {"pass", v.pass}, {"reason", v.reason}};
    if (!v.pass) rc = kDataError;
  }
  std::cout << doc.dump(2) << '\n';
  return rc;
}

struct GenArgs {
  GenConfig cfg;
  std::string size_dist = "geometric";
  std::string encoding = "utf8";
  std::string out = "-";
};

std::string generate_encoded(const GenArgs& g) {
  GenConfig cfg = g.cfg;
  if (g.size_dist == "fixed") {
    cfg.field_size = SizeDistribution::fixed;
  } else if (g.size_dist == "uniform") {
    cfg.field_size = SizeDistribution::uniform;
  } else if (g.size_dist == "geometric") {
    cfg.field_size = SizeDistribution::geometric;
  } else {
    throw ConfigError("unknown size distribution '" + g.size_dist + "'");
  }
  std::string text = generate(cfg);
  if (g.encoding == "utf8" || g.encoding == "ascii") return text;
  const auto enc = parse_encoding(g.encoding);
  if (!enc) throw ConfigError("unknown encoding '" + g.encoding + "'");
  const auto wide = utf8_to_utf16(text, *enc);
  return std::string(wide.begin(), wide.end());
}

int cmd_gen(const GenArgs& g) {
  Output out(g.out);
  out.write(generate_encoded(g));
  return kOk;
}

struct BenchArgs {
  std::vector<std::size_t> chunk_sizes = {4, 8, 16, 24, 31, 32, 48, 64};
  std::vector<std::size_t> workers = {1, 2, 4, 8};
  std::size_t repeat = 1;
  std::uint64_t bytes = 16ull << 20;
  std::uint64_t seed = 1;
  std::string out = "-";
};

int cmd_bench(const Common& c, const BenchArgs& b, bool input_given) {
  const auto dialect = make_dialect(c.dialect);
  const auto schema = make_schema(c);
  std::vector<std::uint8_t> data;
  if (input_given) {
    data = read_all(c.input);
  } else {
    GenConfig g;
    g.seed = b.seed;
    g.target_bytes = b.bytes;
    const auto s = generate(g);
    data.assign(s.begin(), s.end());
  }
  Output out(b.out);
  std::ostringstream csv;
  csv << "chunk_size,workers,repeat,bytes,wall_s,parse_s,scan_s,tag_s,partition_s,convert_s,gbps,hash\n";
  std::map<std::size_t, double> best_by_workers;
  std::optional<std::uint64_t> first_hash;
  bool deterministic = true;
  for (std::size_t w : b.workers) {
    WorkerPool pool(w);
    for (std::size_t cs : b.chunk_sizes) {
      Common cc = c;
      cc.chunk_size = cs;
      cc.workers = w;
      ParseOptions opt;
      try {
        opt = make_options(cc);
      } catch (const ConfigError&) {
        continue;  // e.g. odd chunk sizes under UTF-16
      }
      for (std::size_t r = 0; r < b.repeat; ++r) {
        auto res = parse_buffer(data, dialect, opt, schema, pool);
        const auto hash = fnv1a(to_container(res.table));
        if (!first_hash) first_hash = hash;
        deterministic = deterministic && hash == *first_hash;
        const auto& t = res.times;
        csv << cs << ',' << w << ',' << r << ',' << data.size() << ',' << t.wall << ',' << t.parse << ','
            << t.scan << ',' << t.tag << ',' << t.partition << ',' << t.convert << ','
            << (t.wall > 0 ? data.size() / t.wall / 1e9 : 0.0) << ',' << hex64(hash) << '\n';
        auto& best = best_by_workers[w];
        if (best == 0 || t.wall < best) best = t.wall;
      }
    }
  }
  out.write(csv.str());
  if (best_by_workers.count(1)) {
    for (const auto& [w, t] : best_by_workers) {
      std::cerr << "workers=" << w << " best_wall=" << t << "s speedup=" << best_by_workers[1] / t << '\n';
    }
  }
  std::cerr << (deterministic ? "output hashes identical across configurations" : "OUTPUT HASHES DIFFER") << '\n';
  return deterministic ? kOk : kDataError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chunk-parallel parser for delimiter-separated data"};
  app.require_subcommand(1);

  Common parse_c, validate_c, infer_c, bench_c;
  std::string out_path = "-", format = "pprw";
  bool quiet = false;
  auto* parse = app.add_subcommand("parse", "parse into a columnar container or canonical CSV");
  add_common(*parse, parse_c);
  parse->add_option("-o,--output", out_path, "output file, '-' for stdout")->capture_default_str();
  parse->add_option("--format", format, "pprw|csv")->capture_default_str();
  parse->add_flag("-q,--quiet", quiet, "no statistics on stderr");

  std::optional<std::uint32_t> validate_expected, infer_expected;
  auto* validate = app.add_subcommand("validate", "check structure and column counts");
  add_common(*validate, validate_c);
  validate->add_option("--expect-columns", validate_expected, "required columns per record");

  auto* infer = app.add_subcommand("infer", "print the inferred schema and column count range");
  add_common(*infer, infer_c);
  infer->add_option("--expect-columns", infer_expected, "required columns per record");

  GenArgs gen_args;
  auto* gen = app.add_subcommand("gen", "generate a synthetic corpus");
  gen->add_option("--seed", gen_args.cfg.seed)->capture_default_str();
  gen->add_option("--bytes", gen_args.cfg.target_bytes, "approximate size")->capture_default_str();
  gen->add_option("--columns", gen_args.cfg.columns)->capture_default_str();
  gen->add_option("--size-dist", gen_args.size_dist, "fixed|uniform|geometric")->capture_default_str();
  gen->add_option("--mean-field-bytes", gen_args.cfg.mean_field_bytes)->capture_default_str();
  gen->add_option("--quote-density", gen_args.cfg.quote_density)->capture_default_str();
  gen->add_option("--embedded-rate", gen_args.cfg.embedded_rate)->capture_default_str();
  gen->add_option("--empty-rate", gen_args.cfg.empty_rate)->capture_default_str();
  gen->add_option("--numeric-share", gen_args.cfg.numeric_share)->capture_default_str();
  gen->add_option("--skew-bytes", gen_args.cfg.skew_bytes, "one quoted field of this size")->capture_default_str();
  gen->add_flag("--multilingual", gen_args.cfg.multilingual);
  bool no_final_newline = false;
  gen->add_flag("--no-final-newline", no_final_newline);
  gen->add_option("--encoding", gen_args.encoding, "utf8|utf16le|utf16be")->capture_default_str();
  gen->add_option("-o,--output", gen_args.out)->capture_default_str();

  BenchArgs bench_args;
  auto* bench = app.add_subcommand("bench", "chunk-size and worker sweep, CSV of stage timings");
  add_common(*bench, bench_c);
  bench->add_option("--chunk-sizes", bench_args.chunk_sizes)->delimiter(',');
  bench->add_option("--worker-list", bench_args.workers)->delimiter(',');
  bench->add_option("--repeat", bench_args.repeat)->capture_default_str();
  bench->add_option("--bytes", bench_args.bytes, "generated input size when no input is given")->capture_default_str();
  bench->add_option("--seed", bench_args.seed)->capture_default_str();
  bench->add_option("-o,--output", bench_args.out)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*parse) return cmd_parse(parse_c, out_path, format, quiet);
    if (*validate) return cmd_validate(validate_c, validate_expected);
    if (*infer) return cmd_infer(infer_c, infer_expected);
    if (*gen) {
      gen_args.cfg.final_newline = !no_final_newline;
      return cmd_gen(gen_args);
    }
    if (*bench) {
      const bool input_given = bench->get_option("input")->count() > 0;
      return cmd_bench(bench_c, bench_args, input_given);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const ModeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDataError;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDataError;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsage;
}
