// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails. `dsvpar_acceptance name...` runs a subset.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "support.hpp"

using namespace dsvpar;
using testing::bytes;
using testing::FuzzSource;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ull;
  return h;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int prec = 1) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(prec);
  os << v;
  return os.str();
}

std::string container_of(const std::function<Table()>& run) {
  try {
    return to_container(run());
  } catch (const std::exception& e) {
    return std::string("exception: ") + e.what();
  }
}

// ---------------------------------------------------------------------------

Outcome differential_fuzz() {
  const auto t0 = std::chrono::steady_clock::now();
  constexpr int kInputs = 10000;
  const std::size_t chunk_sizes[] = {1, 2, 3, 7, 16, 31, 64};
  const std::size_t worker_counts[] = {1, 2, 8};
  std::map<std::size_t, WorkerPool> pools;
  for (auto w : worker_counts) pools.try_emplace(w, w);

  FuzzSource fuzz(0x5eed);
  std::uint64_t runs = 0, mismatches = 0, bytes_total = 0;
  std::string first;
  for (int i = 0; i < kInputs; ++i) {
    const std::string s = fuzz.input(64 << 10);
    const auto in = bytes(s);
    bytes_total += in.size();
    const std::string expect =
        container_of([&] { return sequential_parse(in, testing::csv().spec, ParseOptions{}).table; });
    for (auto cs : chunk_sizes) {
      for (auto w : worker_counts) {
        ParseOptions opt;
        opt.chunk_size = cs;
        opt.workers = w;
        const std::string got =
            container_of([&] { return parse_buffer(in, testing::csv(), opt, std::nullopt, pools.at(w)).table; });
        ++runs;
        if (got != expect) {
          ++mismatches;
          if (first.empty()) {
            first = " first: input " + std::to_string(i) + " (" + std::to_string(in.size()) + " B) cs=" +
                    std::to_string(cs) + " w=" + std::to_string(w);
          }
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 600,
          std::to_string(kInputs) + " inputs (" + fmt(bytes_total / 1048576.0) + " MiB), " + std::to_string(runs) +
              " parses vs oracle, " + std::to_string(mismatches) + " mismatches, " + fmt(secs) + " s (limit 600)" +
              first};
}

Outcome context_scan() {
  std::mt19937_64 rng(6);
  FuzzSource fuzz(66);
  int bad = 0;
  std::uint64_t chunks = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t groups = 2 + rng() % 4;
    const Dialect d(testing::random_dfa(rng, 6, groups));
    std::string s(fuzz.below(t % 10 == 0 ? 300000 : 5000), ' ');
    for (auto& c : s) c = static_cast<char>(fuzz.chance(0.9) ? 'a' + fuzz.below(groups) : fuzz.below(256));
    const auto in = bytes(s);
    const std::size_t cs = 1 + fuzz.below(64);
    std::vector<StateTransitionVector> stvs;
    for (std::size_t i = 0; i < in.size(); i += cs) {
      stvs.push_back(simulate_chunk_all_states(std::span(in).subspan(i, std::min(cs, in.size() - i)), d.spec,
                                               d.matcher, EncodingId::ascii));
    }
    chunks += stvs.size();
    const auto got = resolve_start_states(stvs, d.spec.start_state(), 6, 1 + fuzz.below(8));
    if (got.start_states != boundary_states(in, d.spec, EncodingId::ascii, cs)) ++bad;
  }
  return {bad == 0, "1000 random 6-state DFAs, " + std::to_string(chunks) + " chunk boundaries, " +
                        std::to_string(bad) + " cases differ"};
}

Outcome fixtures() {
  std::vector<std::string> failed;
  auto check = [&](bool ok, const char* what) {
    if (!ok) failed.push_back(what);
  };
  using namespace csv;
  const auto spec = build_csv_dialect(',', '"', '\n');
  auto row = [&](std::uint8_t b) {
    const auto r = spec.row(spec.group_of(b));
    return std::vector<StateIndex>(r.begin(), r.end());
  };
  using V = std::vector<StateIndex>;
  check(row(',') == V{kEndOfField, kEnclosed, kEndOfField, kEndOfField, kEndOfField, kInvalid}, "row ,");
  check(row('\n') == V{kEndOfRecord, kEnclosed, kEndOfRecord, kEndOfRecord, kEndOfRecord, kInvalid}, "row \\n");
  check(row('"') == V{kEnclosed, kEscape, kInvalid, kEnclosed, kEnclosed, kInvalid}, "row \"");
  check(row('x') == V{kField, kEnclosed, kField, kField, kInvalid, kInvalid}, "row other");

  check(h_nullbyte(0x50000E26u) == 0x00800000u, "H");
  check(bfind(0x00800000u) == 23, "msb index");
  check((bfind(0x00800000u) >> 3) == 2, "byte position");
  const std::uint8_t syms[] = {'\n', '"', ',', '|', '\t'};
  const GroupIndex groups[] = {0, 1, 2, 3, 4};
  const SymbolMatcher m(syms, groups, 5);
  check((m.low_word() ^ (0x2Cu * 0x01010101u)) == 0x50000E26u, "xor word");
  check(m.match_position(',') == 2, "matcher lookup");

  constexpr auto layout = packed_layout(10, 5);
  check(layout.avail_bits == 3 && layout.fragment_bits == 2 && layout.fragments == 3, "packed layout");

  const std::vector<std::uint64_t> in = {3, 5, 1, 2, 9, 7, 4, 2};
  for (std::size_t w : {1, 2, 8}) {
    check(exclusive_scan<std::uint64_t>(in, [](auto a, auto b) { return a + b; }, 0, w) ==
              std::vector<std::uint64_t>{0, 3, 8, 9, 11, 20, 27, 31},
          "prefix sum");
  }
  std::string detail = "transition rows, null-byte word, packed layout, prefix sum";
  for (const auto& f : failed) detail += "; failed: " + f;
  return {failed.empty(), detail};
}

Outcome column_inference() {
  const auto in = bytes("1,Apples\n2\n");
  WorkerPool pool(2);
  bool ok = true;
  std::string detail;
  const auto res = parse_buffer(in, testing::csv(), ParseOptions{});
  ok &= res.diag.column_stats.min == 1 && res.diag.column_stats.max == 2;
  detail = "min=" + std::to_string(res.diag.column_stats.min) + " max=" + std::to_string(res.diag.column_stats.max);
  for (std::size_t cs : {1, 2, 3, 5, 31, 64}) {
    ParseOptions opt;
    opt.chunk_size = cs;
    const auto v = check_column_count(in, testing::csv(), opt, 2, pool);
    const bool named = !v.offenders.empty() && v.offenders.front().first_record == 1 && v.offenders.front().columns == 1;
    ok &= !v.pass && named;
    if (cs == 31) {
      detail += "; expected=2 -> " + std::string(v.pass ? "pass" : "fail") +
                (named ? ", offending record 1 (1 column)" : ", offender not identified");
    }
  }
  const auto good = check_column_count(bytes("1,Apples\n2,Pears\n"), testing::csv(), ParseOptions{}, 2, pool);
  ok &= good.pass;
  return {ok, detail};
}

// Uniform generator corpus whose records stay well under 1 KiB.
std::string small_record_corpus(FuzzSource& fuzz, std::size_t target) {
  GenConfig g;
  g.seed = fuzz.engine()();
  g.target_bytes = target;
  g.columns = 1 + static_cast<std::uint32_t>(fuzz.below(12));
  g.field_size = SizeDistribution::uniform;
  g.mean_field_bytes = 1 + static_cast<std::uint32_t>(fuzz.below(16));
  g.quote_density = fuzz.chance(0.5) ? 0.0 : 0.6;
  g.embedded_rate = 0.3;
  g.multilingual = fuzz.chance(0.5);
  g.final_newline = fuzz.chance(0.5);
  return generate(g);
}

Outcome streaming() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t sizes[] = {1 << 10, 64 << 10, 1 << 20};
  FuzzSource fuzz(0xab5);
  WorkerPool pool(2);
  int bad = 0;
  std::uint64_t total = 0, inside_record = 0, inside_quotes = 0, max_partitions = 0;
  std::string first;
  for (int i = 0; i < 100; ++i) {
    const std::size_t target = i == 0 ? (8u << 20) : fuzz.size(8u << 20);
    const std::string s = i % 2 ? fuzz.records(target, 1000) : small_record_corpus(fuzz, target);
    const auto in = bytes(std::string_view(s).substr(0, 8u << 20));
    total += in.size();
    ParseOptions opt;
    opt.encoding = EncodingId::utf8;
    opt.chunk_size = 1 + fuzz.below(64);
    const std::string single = container_of([&] { return parse_buffer(in, testing::csv(), opt, std::nullopt, pool).table; });
    for (auto p : sizes) {
      StreamConfig cfg;
      cfg.parse = opt;
      cfg.parse.workers = 2;
      cfg.partition_size = p;
      const std::string streamed = container_of([&] {
        MemorySource src(in, 1 + fuzz.below(3 * p));
        TableSink sink;
        const auto st = run_pipeline(src, sink, testing::csv(), cfg);
        max_partitions = std::max(max_partitions, st.partitions);
        return std::move(sink.table());
      });
      if (streamed != single) {
        ++bad;
        if (first.empty()) first = "; first: input " + std::to_string(i) + " P=" + std::to_string(p);
      }
      const auto states = boundary_states(in, testing::csv().spec, EncodingId::utf8, p);
      for (std::size_t k = 1; k < states.size(); ++k) {
        inside_record += states[k] != csv::kEndOfRecord;
        inside_quotes += states[k] == csv::kEnclosed;
      }
    }
  }
  return {bad == 0, "100 inputs (" + fmt(total / 1048576.0) + " MiB, largest 8 MiB) x partition sizes {1 KiB, 64 KiB, " +
                        "1 MiB}: " + std::to_string(bad) + " differ from single-shot; " +
                        std::to_string(inside_record) + " partition cuts inside records, " +
                        std::to_string(inside_quotes) + " inside quoted fields, up to " +
                        std::to_string(max_partitions) + " partitions, " + fmt(seconds_since(t0)) + " s" + first};
}

Outcome tagging_modes() {
  FuzzSource fuzz(0x7a9);
  WorkerPool pool(2);
  int bad = 0, inputs = 0;
  const TaggingMode modes[] = {TaggingMode::tagged, TaggingMode::inline_terminated, TaggingMode::vector_delimited};
  for (int i = 0; i < 600; ++i) {
    const std::size_t target = fuzz.size(i % 50 == 0 ? (4u << 20) : (64u << 10));
    const std::string s = i % 2 ? fuzz.records(target, SIZE_MAX, 0) : small_record_corpus(fuzz, target);
    const auto in = bytes(s);
    ParseOptions opt;
    opt.chunk_size = 1 + fuzz.below(64);
    opt.window_bytes = 1 + fuzz.below(1 << 16);
    opt.selection.skip_records = fuzz.chance(0.3) ? std::vector<std::uint64_t>{0} : std::vector<std::uint64_t>{};
    std::string ref;
    for (auto mode : modes) {
      opt.mode = mode;
      const std::string got = container_of([&] { return parse_buffer(in, testing::csv(), opt, std::nullopt, pool).table; });
      if (mode == TaggingMode::tagged) {
        ref = got;
      } else if (got != ref) {
        ++bad;
      }
    }
    if (ref.rfind("exception", 0) == 0) ++bad;
    ++inputs;
  }
  return {bad == 0, std::to_string(inputs) + " terminator-free uniform inputs x {tagged, inline, delimited}: " +
                        std::to_string(bad) + " containers differ"};
}

// The skew check runs in a fresh child process so its peak RSS is its own.
constexpr std::uint64_t kSkewInput = 64ull << 20;
constexpr std::uint64_t kSkewField = 8ull << 20;

std::string skew_corpus() {
  GenConfig g;
  g.seed = 64;
  g.target_bytes = kSkewInput;  // total size, giant field included
  g.skew_bytes = kSkewField;
  g.embedded_rate = 0.05;
  return generate(g);
}

std::uint64_t peak_rss_kib() {
  std::ifstream in("/proc/self/status");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("VmHWM:", 0) == 0) return std::stoull(line.substr(6));
  }
  return 0;
}

// Child entry: prints "<hash> <peak KiB> <input bytes> <longest field>".
int skew_child(const std::string& mode) {
  std::vector<std::uint8_t> in;
  {
    const std::string s = skew_corpus();
    in.assign(s.begin(), s.end());
  }
  Table table;
  if (mode == "oracle") {
    table = sequential_parse(in, testing::csv().spec, ParseOptions{}).table;
  } else {
    StreamConfig cfg;
    cfg.parse.mode = *parse_mode(mode);
    MemorySource src(in);
    TableSink sink;
    run_pipeline(src, sink, testing::csv(), cfg);
    table = std::move(sink.table());
  }
  const std::uint64_t peak = peak_rss_kib();
  std::uint64_t longest = 0;
  for (const auto& c : table.columns) {
    if (c.data.type != LogicalType::utf8) continue;
    for (std::uint64_t r = 0; r < table.rows; ++r) longest = std::max<std::uint64_t>(longest, c.data.offsets[r + 1] - c.data.offsets[r]);
  }
  std::cout << hex(fnv1a(to_container(table))) << ' ' << peak << ' ' << in.size() << ' ' << longest << '\n';
  return 0;
}

std::string run_self(const std::string& args) {
  char exe[4096];
  const ssize_t n = readlink("/proc/self/exe", exe, sizeof exe - 1);
  if (n <= 0) return {};
  exe[n] = '\0';
  std::FILE* p = popen((std::string(exe) + " " + args).c_str(), "r");
  if (!p) return {};
  std::string out;
  char buf[512];
  for (std::size_t k; (k = std::fread(buf, 1, sizeof buf, p)) > 0;) out.append(buf, k);
  pclose(p);
  return out;
}

Outcome skew() {
  const auto t0 = std::chrono::steady_clock::now();
  std::istringstream oracle(run_self("--skew-child oracle"));
  std::string expect_hash;
  std::uint64_t opeak = 0, input = 0, olongest = 0;
  oracle >> expect_hash >> opeak >> input >> olongest;
  // Decoded length: each doubled quote in the raw field counts once.
  bool ok = !expect_hash.empty() && olongest >= kSkewField * 9 / 10;
  std::string detail = "input " + fmt(input / 1048576.0) + " MiB, quoted field " + fmt(olongest / 1048576.0) + " MiB;";
  for (const char* mode : {"tagged", "inline", "delimited"}) {
    std::istringstream out(run_self(std::string("--skew-child ") + mode));
    std::string hash;
    std::uint64_t peak = 0, in = 0, longest = 0;
    out >> hash >> peak >> in >> longest;
    const double ratio = input ? static_cast<double>(peak) * 1024 / static_cast<double>(input) : 0;
    const bool mode_ok = hash == expect_hash && peak > 0 && ratio <= 8.0;
    ok &= mode_ok;
    detail += std::string(" ") + mode + ": " + (hash == expect_hash ? "matches oracle" : "MISMATCH") + ", peak " +
              fmt(peak / 1024.0) + " MiB (" + fmt(ratio, 2) + "x);";
  }
  detail += " limit 8x, " + fmt(seconds_since(t0)) + " s";
  return {ok, detail};
}

bool valid_utf8(std::string_view s) {
  for (std::size_t i = 0; i < s.size();) {
    const auto b = static_cast<unsigned char>(s[i]);
    const std::size_t len = b < 0x80 ? 1 : (b >> 5) == 6 ? 2 : (b >> 4) == 14 ? 3 : (b >> 3) == 30 ? 4 : 0;
    if (len == 0 || i + len > s.size()) return false;
    for (std::size_t k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return false;
    }
    i += len;
  }
  return true;
}

bool table_utf8_ok(const Table& t) {
  for (const auto& c : t.columns) {
    if (c.data.type == LogicalType::utf8 && !valid_utf8({reinterpret_cast<const char*>(c.data.data.data()), c.data.data.size()})) {
      return false;
    }
  }
  return true;
}

Outcome encoding() {
  WorkerPool pool(2);
  int bad = 0, runs = 0;
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    GenConfig g;
    g.seed = seed;
    g.multilingual = true;
    g.target_bytes = seed == 1 ? (1u << 20) : 20000 * seed;
    g.mean_field_bytes = static_cast<std::uint32_t>(2 + seed * 3);
    g.quote_density = 0.4;
    g.embedded_rate = 0.2;
    g.final_newline = seed % 2;
    const std::string s = generate(g);
    const auto u8 = bytes(s);
    const auto u16 = utf8_to_utf16(s, EncodingId::utf16le);
    ParseOptions o8;
    o8.encoding = EncodingId::utf8;
    ParseOptions o16;
    o16.encoding = EncodingId::utf16le;
    o16.chunk_size = 2;
    const Table oracle8 = sequential_parse(u8, testing::csv().spec, o8).table;
    const std::string expect8 = to_container(oracle8);
    const std::string expect16 = to_container(sequential_parse(u16, testing::csv().spec, o16).table);
    if (expect16 != expect8 || !table_utf8_ok(oracle8)) ++bad;
    for (std::size_t cs = 2; cs <= 64; ++cs) {
      o8.chunk_size = cs;
      const Table t8 = parse_buffer(u8, testing::csv(), o8, std::nullopt, pool).table;
      bad += to_container(t8) != expect8 || !table_utf8_ok(t8);
      ++runs;
      if (cs % 2 == 0) {
        o16.chunk_size = cs;
        const Table t16 = parse_buffer(u16, testing::csv(), o16, std::nullopt, pool).table;
        bad += to_container(t16) != expect16;
        ++runs;
      }
    }
  }
  return {bad == 0, "6 multilingual corpora, UTF-8 x chunk sizes 2..64 and UTF-16LE x even sizes 2..64 (" +
                        std::to_string(runs) + " runs): " + std::to_string(bad) +
                        " differ from the oracle or hold split code points"};
}

Outcome determinism() {
  bool ok = true;
  std::string detail;
  {
    GenConfig g;
    g.target_bytes = 8u << 20;
    g.quote_density = 0.3;
    const std::string s = generate(g);
    const auto in = bytes(s);
    std::set<std::string> hashes;
    for (std::size_t w : {1, 2, 3, 4, 8}) {
      ParseOptions opt;
      opt.workers = w;
      hashes.insert(hex(fnv1a(to_container(parse_buffer(in, testing::csv(), opt).table))));
      StreamConfig cfg;
      cfg.parse = opt;
      cfg.partition_size = 1 << 20;
      MemorySource src(in);
      TableSink sink;
      run_pipeline(src, sink, testing::csv(), cfg);
      hashes.insert(hex(fnv1a(to_container(sink.table()))));
    }
    ok &= hashes.size() == 1;
    detail = "hashes over workers {1,2,3,4,8} x {buffer, stream}: " + std::to_string(hashes.size()) + " distinct";
  }
  {
    // The benchmark harness: one CSV row per (chunk size, workers).
    const std::string out = [] {
      std::FILE* p = popen((std::string(DSVPAR_CLI) +
                            " bench --bytes 4194304 --chunk-sizes 1,2,4,8,16,31,32,64 --worker-list 1,4 --repeat 1 2>/dev/null")
                               .c_str(),
                           "r");
      std::string o;
      if (!p) return o;
      char buf[4096];
      for (std::size_t k; (k = std::fread(buf, 1, sizeof buf, p)) > 0;) o.append(buf, k);
      pclose(p);
      return o;
    }();
    std::istringstream lines(out);
    std::string line;
    std::getline(lines, line);
    int rows = 0;
    std::set<std::string> hashes;
    std::cout << "  chunk-size sweep (4 MiB):\n";
    while (std::getline(lines, line)) {
      ++rows;
      hashes.insert(line.substr(line.rfind(',') + 1));
      std::cout << "    " << line << '\n';
    }
    ok &= rows == 16 && hashes.size() == 1;
    detail += "; sweep rows " + std::to_string(rows) + "/16, " + std::to_string(hashes.size()) + " distinct hash";
  }
  {
    GenConfig g;
    g.target_bytes = 100u << 20;
    const std::string s = generate(g);
    const auto in = bytes(s);
    double t[2] = {0, 0};
    std::size_t k = 0;
    for (std::size_t w : {1, 4}) {
      ParseOptions opt;
      opt.workers = w;
      const auto t0 = std::chrono::steady_clock::now();
      (void)parse_buffer(in, testing::csv(), opt);
      t[k++] = seconds_since(t0);
    }
    detail += "; informational: 100 MiB in " + fmt(t[0], 2) + " s (1 worker) vs " + fmt(t[1], 2) +
              " s (4 workers), speedup " + fmt(t[0] / t[1], 2) + "x on " +
              std::to_string(std::thread::hardware_concurrency()) + " hardware thread(s)";
  }
  return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc == 3 && std::string(argv[1]) == "--skew-child") return skew_child(argv[2]);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"differential_fuzz", differential_fuzz}, {"context_scan", context_scan},
      {"fixtures", fixtures},                   {"column_inference", column_inference},
      {"streaming_equivalence", streaming},     {"tagging_mode_equivalence", tagging_modes},
      {"skew_robustness", skew},                {"encoding", encoding},
      {"determinism_scaling", determinism},
  };
  std::set<std::string> only(argv + 1, argv + argc);
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && !only.count(name)) continue;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    failed += !o.pass;
  }
  return failed ? 1 : 0;
}
