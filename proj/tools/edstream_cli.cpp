// Command-line surface for the streaming matcher: match / oracle / compare /
// decompose / bench. Inputs are byte streams (or UTF-8 code points with
// --utf8); pattern and text stay streams end to end, so `match` memory use is
// governed by the matcher parameters, not the input length.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "edstream/edstream.hpp"

namespace {

using edstream::Text;

// One-symbol-at-a-time reader: bytes, or UTF-8 sequences under utf8 mode.
// Never reads past the symbol it is asked for.
class SymbolReader {
 public:
  SymbolReader(std::istream& in, bool utf8, std::string name)
      : in_(in), utf8_(utf8), name_(std::move(name)) {}

  std::optional<char32_t> next() {
    const int c = in_.get();
    if (c == EOF) return std::nullopt;
    ++offset_;
    if (!utf8_ || c < 0x80) return static_cast<char32_t>(c);

    int extra = 0;
    char32_t cp = 0;
    if ((c & 0xE0) == 0xC0) { extra = 1; cp = c & 0x1F; }
    else if ((c & 0xF0) == 0xE0) { extra = 2; cp = c & 0x0F; }
    else if ((c & 0xF8) == 0xF0) { extra = 3; cp = c & 0x07; }
    else fail("invalid UTF-8 lead byte");
    for (int i = 0; i < extra; ++i) {
      const int cc = in_.get();
      if (cc == EOF || (cc & 0xC0) != 0x80) fail("truncated UTF-8 sequence");
      ++offset_;
      cp = (cp << 6) | (cc & 0x3F);
    }
    if (cp > 0x10FFFF) fail("UTF-8 code point out of range");
    return cp;
  }

  std::uint64_t offset() const { return offset_; }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw std::runtime_error(name_ + ": " + what + " at byte " + std::to_string(offset_));
  }

  std::istream& in_;
  bool utf8_;
  std::string name_;
  std::uint64_t offset_ = 0;
};

struct IoConfig {
  std::string pattern_path;
  std::uint64_t pattern_len = 0;  // 0: pattern file read to EOF
  std::string text_path = "-";
  std::string output_path;
  bool utf8 = false;
  std::string format = "text";
};

struct EngineConfig {
  std::uint32_t k = 0;
  std::uint64_t length_bound = 1 << 20;
  std::uint64_t seed = 0;
  std::uint32_t copies = 0;
  std::uint32_t threads = 1;
  std::string engine = "reference";
  std::uint64_t beta = 0;
  std::uint64_t rwin = 0;
  std::uint64_t scap = 0;
  std::uint32_t independence = 0;
  double failure_exponent = 0.0;

  edstream::MatcherParams matcher_params() const {
    edstream::MatcherParams mp;
    mp.length_bound = length_bound;
    mp.max_edits = k;
    mp.copies = copies;
    mp.threads = threads;
    mp.engine = engine;
    mp.seed = seed;
    mp.overrides = overrides();
    return mp;
  }

  edstream::DecompOverrides overrides() const {
    edstream::DecompOverrides ov;
    if (beta) ov.target_block_len = beta;
    if (rwin) ov.definite_window = rwin;
    if (scap) ov.grammar_cap = scap;
    if (independence) ov.independence = independence;
    if (failure_exponent > 0) ov.failure_exponent = failure_exponent;
    return ov;
  }
};

void add_engine_flags(CLI::App* cmd, EngineConfig& ec) {
  cmd->add_option("-k,--max-edits", ec.k, "edit distance threshold")->required();
  cmd->add_option("-n,--length-bound", ec.length_bound,
                  "maximum supported total stream length");
  cmd->add_option("--seed", ec.seed, "master seed")->envname("EDSTREAM_SEED");
  cmd->add_option("--copies", ec.copies, "matcher copies (0 = derived default)")
      ->envname("EDSTREAM_COPIES");
  cmd->add_option("--threads", ec.threads, "worker threads for the ensemble");
  cmd->add_option("--engine", ec.engine, "mismatch engine implementation");
  cmd->add_option("--beta", ec.beta, "target block length override");
  cmd->add_option("--rwin", ec.rwin, "pairing window override");
  cmd->add_option("--scap", ec.scap, "per-block grammar rule cap override");
  cmd->add_option("--independence", ec.independence, "marking hash independence degree");
  cmd->add_option("--failure-exponent", ec.failure_exponent,
                  "inverse failure budget exponent");
}

void add_io_flags(CLI::App* cmd, IoConfig& io, bool needs_pattern) {
  if (needs_pattern) {
    auto* p = cmd->add_option("-p,--pattern", io.pattern_path, "pattern file");
    auto* l = cmd->add_option("--pattern-len", io.pattern_len,
                              "read the pattern as the first N symbols of the input stream");
    p->excludes(l);
  }
  cmd->add_option("text", io.text_path, "text file, or - for stdin");
  cmd->add_option("-o,--output", io.output_path, "output file (default stdout)");
  cmd->add_flag("--utf8", io.utf8, "treat inputs as UTF-8 code points");
  cmd->add_option("--format", io.format, "output format")
      ->check(CLI::IsMember({"text", "json"}));
}

struct OpenedInput {
  std::unique_ptr<std::ifstream> file;
  std::istream* stream = nullptr;
  std::string name;
};

OpenedInput open_input(const std::string& path) {
  OpenedInput oi;
  if (path == "-") {
    oi.stream = &std::cin;
    oi.name = "<stdin>";
    return oi;
  }
  oi.file = std::make_unique<std::ifstream>(path, std::ios::binary);
  if (!*oi.file) throw std::runtime_error("cannot open input: " + path);
  oi.stream = oi.file.get();
  oi.name = path;
  return oi;
}

struct OpenedOutput {
  std::unique_ptr<std::ofstream> file;
  std::ostream* stream = nullptr;
};

OpenedOutput open_output(const std::string& path) {
  OpenedOutput oo;
  if (path.empty()) {
    oo.stream = &std::cout;
    return oo;
  }
  oo.file = std::make_unique<std::ofstream>(path, std::ios::binary);
  if (!*oo.file) throw std::runtime_error("cannot open output: " + path);
  oo.stream = oo.file.get();
  return oo;
}

Text read_all(SymbolReader& r, std::uint64_t cap) {
  Text out;
  while (auto c = r.next()) {
    out.push_back(*c);
    if (out.size() > cap) throw std::runtime_error("input exceeds the length bound");
  }
  return out;
}

// Pattern source: its own file, or a prefix of the text stream.
Text read_pattern(const IoConfig& io, SymbolReader& text_reader, std::uint64_t cap) {
  if (!io.pattern_path.empty()) {
    auto in = open_input(io.pattern_path);
    SymbolReader r(*in.stream, io.utf8, in.name);
    return read_all(r, cap);
  }
  if (io.pattern_len == 0)
    throw CLI::ValidationError("match", "either --pattern or --pattern-len is required");
  Text out;
  out.reserve(io.pattern_len);
  for (std::uint64_t i = 0; i < io.pattern_len; ++i) {
    auto c = text_reader.next();
    if (!c) throw std::runtime_error("stream ended inside the pattern prefix");
    out.push_back(*c);
  }
  return out;
}

void write_report(std::ostream& os, const IoConfig& io, std::uint64_t pos,
                  const edstream::EditReport& r, std::uint32_t k) {
  if (io.format == "json") {
    nlohmann::json j;
    j["pos"] = pos;
    j["finite"] = r.finite;
    if (r.finite) j["dist"] = r.value;
    else j["dist"] = nullptr;
    os << j.dump() << '\n';
  } else if (r.finite) {
    os << pos << '\t' << r.value << '\n';
  } else {
    os << pos << '\t' << '>' << k << '\n';
  }
}

int cmd_match(const IoConfig& io, const EngineConfig& ec) {
  auto in = open_input(io.text_path);
  SymbolReader reader(*in.stream, io.utf8, in.name);
  auto out = open_output(io.output_path);

  const Text pattern = read_pattern(io, reader, ec.length_bound);
  edstream::Ensemble e(ec.matcher_params());
  for (char32_t c : pattern) e.push_pattern_symbol(c);
  e.end_pattern();

  std::uint64_t pos = 0;
  try {
    while (auto c = reader.next()) {
      const edstream::EditReport r = e.push_text_symbol(*c);
      write_report(*out.stream, io, ++pos, r, ec.k);
    }
  } catch (const edstream::Error& err) {
    throw std::runtime_error(std::string(err.what()) + " at text position " +
                             std::to_string(pos + 1));
  }
  out.stream->flush();
  return 0;
}

int cmd_oracle(const IoConfig& io, const EngineConfig& ec) {
  auto in = open_input(io.text_path);
  SymbolReader reader(*in.stream, io.utf8, in.name);
  auto out = open_output(io.output_path);

  const Text pattern = read_pattern(io, reader, ec.length_bound);
  const Text text = read_all(reader, ec.length_bound);
  const auto vals = edstream::oracle_all_positions(pattern, text);
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const bool finite = vals[i] <= ec.k;
    write_report(*out.stream, io,  i + 1,
                 finite ? edstream::EditReport::exact(static_cast<std::uint32_t>(vals[i]))
                        : edstream::EditReport::over(),
                 ec.k);
  }
  out.stream->flush();
  return 0;
}

int cmd_compare(const IoConfig& io, const EngineConfig& ec) {
  auto in = open_input(io.text_path);
  SymbolReader reader(*in.stream, io.utf8, in.name);
  auto out = open_output(io.output_path);

  const Text pattern = read_pattern(io, reader, ec.length_bound);
  const Text text = read_all(reader, ec.length_bound);

  edstream::Ensemble e(ec.matcher_params());
  for (char32_t c : pattern) e.push_pattern_symbol(c);
  e.end_pattern();

  const auto truth = edstream::oracle_all_positions(pattern, text);
  std::uint64_t agree = 0, sound = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const edstream::EditReport r = e.push_text_symbol(text[i]);
    const bool want_finite = truth[i] <= ec.k;
    const bool agreed = r.finite == want_finite && (!r.finite || r.value == truth[i]);
    const bool is_sound = !r.finite || r.value >= truth[i];
    agree += agreed;
    sound += is_sound;
    if (!agreed || !is_sound)
      *out.stream << i + 1 << '\t' << (r.finite ? std::to_string(r.value) : ">" + std::to_string(ec.k))
                  << "\toracle=" << truth[i] << (is_sound ? "" : "\tUNSOUND") << '\n';
  }
  const double n = text.empty() ? 1.0 : static_cast<double>(text.size());
  char line[96];
  std::snprintf(line, sizeof line, "agree=%.6f sound=%.6f\n", agree / n, sound / n);
  *out.stream << line;
  out.stream->flush();
  return 0;
}

int cmd_decompose(const IoConfig& io, const EngineConfig& ec) {
  auto in = open_input(io.text_path);
  SymbolReader reader(*in.stream, io.utf8, in.name);
  auto out = open_output(io.output_path);

  const auto dp = edstream::DecompParams::make(ec.length_bound, ec.k, ec.seed, ec.overrides());
  const auto df = edstream::DecompFamilies::make(dp);
  std::ostream& os = *out.stream;
  edstream::ActiveTail tail(
      dp, &df,
      [&](std::uint64_t idx, std::uint64_t lo, std::uint64_t hi, edstream::Grammar&& g,
          bool oversize) {
        if (io.format == "json") {
          nlohmann::json j;
          j["block"] = idx;
          j["lo"] = lo;
          j["hi"] = hi;
          j["rules"] = g.size();
          j["oversize"] = oversize;
          os << j.dump() << '\n';
        } else {
          os << idx << '\t' << lo << '\t' << hi << '\t' << g.size()
             << (oversize ? "\toversize" : "") << '\n';
        }
      });
  while (auto c = reader.next()) tail.push(*c);
  tail.finalize();
  if (tail.saturated()) throw std::runtime_error("structure budget exhausted");
  os.flush();
  return 0;
}

int cmd_bench(const IoConfig& io, const EngineConfig& ec) {
  auto in = open_input(io.text_path);
  SymbolReader reader(*in.stream, io.utf8, in.name);
  auto out = open_output(io.output_path);

  const Text pattern = read_pattern(io, reader, ec.length_bound);
  edstream::Ensemble e(ec.matcher_params());
  for (char32_t c : pattern) e.push_pattern_symbol(c);
  e.end_pattern();

  std::vector<std::uint64_t> lat_ns;
  std::size_t peak_state = 0, peak_engine = 0;
  std::uint64_t symbols = 0;
  const auto t0 = std::chrono::steady_clock::now();
  while (auto c = reader.next()) {
    const auto a = std::chrono::steady_clock::now();
    e.push_text_symbol(*c);
    const auto b = std::chrono::steady_clock::now();
    lat_ns.push_back(std::chrono::duration_cast<std::chrono::nanoseconds>(b - a).count());
    ++symbols;
    if (symbols % 512 == 0) {
      peak_state = std::max(peak_state, e.state_bytes());
      peak_engine = std::max(peak_engine, e.engine_state_bytes());
    }
  }
  const double total_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  peak_state = std::max(peak_state, e.state_bytes());
  peak_engine = std::max(peak_engine, e.engine_state_bytes());

  auto pct = [&](double q) -> std::uint64_t {
    if (lat_ns.empty()) return 0;
    std::size_t idx = static_cast<std::size_t>(q * (lat_ns.size() - 1));
    std::nth_element(lat_ns.begin(), lat_ns.begin() + idx, lat_ns.end());
    return lat_ns[idx];
  };
  const std::size_t copies = e.copy_count();
  *out.stream << "symbols,seconds,sym_per_s,p50_ns,p90_ns,p99_ns,max_ns,"
                 "state_bytes_per_copy,engine_bytes_per_copy,copies\n";
  *out.stream << symbols << ',' << total_s << ','
              << (total_s > 0 ? symbols / total_s : 0.0) << ',' << pct(0.50) << ','
              << pct(0.90) << ',' << pct(0.99) << ','
              << (lat_ns.empty() ? 0 : *std::max_element(lat_ns.begin(), lat_ns.end())) << ','
              << peak_state / copies << ',' << peak_engine / copies << ',' << copies << '\n';
  out.stream->flush();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"streaming k-edit approximate pattern matching"};
  app.require_subcommand(1);

  IoConfig io_match, io_oracle, io_compare, io_decomp, io_bench;
  EngineConfig ec_match, ec_oracle, ec_compare, ec_decomp, ec_bench;

  auto* match = app.add_subcommand("match", "stream the matcher over a text");
  add_engine_flags(match, ec_match);
  add_io_flags(match, io_match, true);

  auto* oracle = app.add_subcommand("oracle", "exact reference answers (quadratic)");
  add_engine_flags(oracle, ec_oracle);
  add_io_flags(oracle, io_oracle, true);

  auto* compare = app.add_subcommand("compare", "matcher vs oracle agreement report");
  add_engine_flags(compare, ec_compare);
  add_io_flags(compare, io_compare, true);

  auto* decomp = app.add_subcommand("decompose", "stream the block decomposition");
  add_engine_flags(decomp, ec_decomp);
  add_io_flags(decomp, io_decomp, false);

  auto* bench = app.add_subcommand("bench", "latency and state measurements, CSV");
  add_engine_flags(bench, ec_bench);
  add_io_flags(bench, io_bench, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (match->parsed()) return cmd_match(io_match, ec_match);
    if (oracle->parsed()) return cmd_oracle(io_oracle, ec_oracle);
    if (compare->parsed()) return cmd_compare(io_compare, ec_compare);
    if (decomp->parsed()) return cmd_decompose(io_decomp, ec_decomp);
    if (bench->parsed()) return cmd_bench(io_bench, ec_bench);
  } catch (const CLI::ValidationError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 2;
}
