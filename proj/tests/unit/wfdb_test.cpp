#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "lsf/error.hpp"
#include "lsf/interchange.hpp"
#include "lsf/log.hpp"
#include "lsf/random.hpp"
#include "lsf/wfdb.hpp"
#include "oracles.hpp"

namespace {

const std::filesystem::path kFixtures = LSF_FIXTURE_DIR;

std::vector<std::uint8_t> words(std::initializer_list<std::uint16_t> ws) {
  std::vector<std::uint8_t> out;
  for (auto w : ws) {
    out.push_back(static_cast<std::uint8_t>(w & 0xFF));
    out.push_back(static_cast<std::uint8_t>(w >> 8));
  }
  return out;
}

std::uint16_t ann(int code, int delta) { return static_cast<std::uint16_t>((code << 10) | delta); }

}  // namespace

TEST(Header, TwoSignals360) {
  const auto h = lsf::parse_header(
      "100 2 360 650000\n100.dat 212 200 11 1024 995 -22131 0 MLII\n100.dat 212 200 11 1024 1011 20052 0 V5\n");
  EXPECT_EQ(h.record_name, "100");
  EXPECT_EQ(h.n_signals, 2);
  EXPECT_DOUBLE_EQ(h.sampling_rate, 360.0);
  EXPECT_EQ(h.n_samples, 650000);
  ASSERT_EQ(h.signals.size(), 2u);
  EXPECT_EQ(h.signals[0].description, "MLII");
  EXPECT_EQ(h.signals[1].initial_value, 1011);
}

TEST(Header, Afib250) {
  const auto h = lsf::parse_header(
      "04015 2 250 9205760\n04015.dat 212 200 12 0 -5 25213 0 ECG1\n04015.dat 212 200 12 0 0 -3578 0 ECG2\n");
  EXPECT_DOUBLE_EQ(h.sampling_rate, 250.0);
}

TEST(Header, GainWithBaselineAndUnits) {
  const auto h = lsf::parse_header("r 1 360 10\nr.dat 212 200(1024)/mV 12 0 0 0 0 lead\n");
  EXPECT_DOUBLE_EQ(h.signals[0].gain, 200.0);
  EXPECT_EQ(h.signals[0].baseline, 1024);
  EXPECT_EQ(h.signals[0].units, "mV");
}

TEST(Header, CommentsSkipped) {
  const auto h = lsf::parse_header("# leading\nr 1 360 10\n# between\nr.dat 212 200 12 0 0 0 0 x\n# age 60\n");
  EXPECT_EQ(h.n_signals, 1);
}

TEST(Header, EmptyIsParseError) {
  EXPECT_THROW(lsf::parse_header(""), lsf::ParseError);
  EXPECT_THROW(lsf::parse_header("\n\n"), lsf::ParseError);
}

TEST(Header, MissingSignalLine) {
  EXPECT_THROW(lsf::parse_header("r 2 360 10\nr.dat 212 200 12 0 0 0 0 x\n"), lsf::ParseError);
}

TEST(Header, OtherFormatsUnsupported) {
  EXPECT_THROW(lsf::parse_header("r 1 360 10\nr.dat 16 200 16 0 0 0 0 x\n"), lsf::UnsupportedFormatError);
}

TEST(Format212, HandCases) {
  const std::uint8_t zero[] = {0x00, 0x00, 0x00};
  EXPECT_EQ(lsf::decode_format212(zero, 2), (std::vector<std::int32_t>{0, 0}));
  const std::uint8_t neg[] = {0xFF, 0x0F, 0x00};
  EXPECT_EQ(lsf::decode_format212(neg, 2), (std::vector<std::int32_t>{-1, 0}));
  const std::uint8_t mixed[] = {0x00, 0x08, 0xFF};
  EXPECT_EQ(lsf::decode_format212(mixed, 2), (std::vector<std::int32_t>{-2048, 255}));
  const std::uint8_t hi[] = {0x00, 0x70, 0xFF};
  EXPECT_EQ(lsf::decode_format212(hi, 2), (std::vector<std::int32_t>{0, 2047}));
}

TEST(Format212, OddCountReadsFirstHalfOfGroup) {
  const std::uint8_t bytes[] = {0x10, 0x02, 0x00, 0x05, 0x00};
  EXPECT_EQ(lsf::decode_format212(bytes, 3), (std::vector<std::int32_t>{0x210, 0, 5}));
}

TEST(Format212, ShortBufferIsDecodeError) {
  const std::uint8_t bytes[] = {0x00, 0x00};
  EXPECT_THROW(lsf::decode_format212(bytes, 2), lsf::DecodeError);
}

TEST(Format212, EncodeMatchesBitLayout) {
  lsf::Rng rng(3);
  for (int k = 0; k < 2000; ++k) {
    const int a = static_cast<int>(rng.below(4096)) - 2048;
    const int b = static_cast<int>(rng.below(4096)) - 2048;
    std::uint8_t want[3];
    oracle::pack212(a, b, want);
    const std::int32_t vals[] = {a, b};
    const auto got = lsf::encode_format212(vals);
    ASSERT_EQ(got.size(), 3u);
    EXPECT_TRUE(std::equal(got.begin(), got.end(), want));
  }
}

TEST(Format212, RandomStreamRoundTrip) {
  lsf::Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::int32_t> v(2 * (1 + rng.below(500)));
    for (auto& x : v) x = static_cast<std::int32_t>(rng.below(4096)) - 2048;
    EXPECT_EQ(lsf::decode_format212(lsf::encode_format212(v), v.size()), v);
  }
}

TEST(Format212, EncodeRejectsOutOfRange) {
  const std::int32_t bad[] = {2048, 0};
  EXPECT_THROW(lsf::encode_format212(bad), lsf::ParameterError);
}

TEST(Format212, PairDecode) {
  const std::int32_t vals[] = {1, -1, 2047, -2048};
  const auto p = lsf::decode_format212_pair(lsf::encode_format212(vals), 2);
  EXPECT_EQ(p.first, (std::vector<std::int32_t>{1, 2047}));
  EXPECT_EQ(p.second, (std::vector<std::int32_t>{-1, -2048}));
}

TEST(Annotations, EndWordOnly) { EXPECT_TRUE(lsf::read_annotations(words({0})).empty()); }

TEST(Annotations, SingleBeat) {
  const auto a = lsf::read_annotations(words({ann(1, 100), 0}));
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0].sample, 100);
  EXPECT_EQ(a[0].symbol, "N");
}

TEST(Annotations, CumulativeDeltas) {
  const auto a = lsf::read_annotations(words({ann(1, 100), ann(5, 50), 0}));
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a[0].sample, 100);
  EXPECT_EQ(a[1].sample, 150);
  EXPECT_EQ(a[1].symbol, "V");
}

TEST(Annotations, SkipWordAddsLongInterval) {
  // SKIP, then the 32-bit interval high word first.
  auto bytes = words({ann(59, 0), 0x0001, 0x0002, ann(1, 3), 0});
  const auto a = lsf::read_annotations(bytes);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0].sample, 65536 + 2 + 3);
}

TEST(Annotations, SubtypeChannelNumAux) {
  std::vector<std::uint8_t> bytes = words({ann(28, 10), ann(61, 2), ann(62, 1), ann(60, 7)});
  const auto aux = words({ann(63, 5)});
  bytes.insert(bytes.end(), aux.begin(), aux.end());
  for (char c : std::string("(AFIB")) bytes.push_back(static_cast<std::uint8_t>(c));
  bytes.push_back(0);
  const auto end = words({0});
  bytes.insert(bytes.end(), end.begin(), end.end());
  const auto a = lsf::read_annotations(bytes);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0].symbol, "+");
  EXPECT_EQ(a[0].subtype, 2);
  EXPECT_EQ(a[0].channel, 1);
  EXPECT_EQ(a[0].num, 7);
  EXPECT_EQ(a[0].aux, "(AFIB");
}

TEST(Annotations, MissingEndWordIsDecodeError) {
  EXPECT_THROW(lsf::read_annotations(words({ann(1, 100)})), lsf::DecodeError);
  EXPECT_THROW(lsf::read_annotations({}), lsf::DecodeError);
}

TEST(Annotations, UnknownCodeKeptWithWarning) {
  lsf::WarningCapture cap;
  const auto a = lsf::read_annotations(words({ann(45, 3), 0}));
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0].symbol, "unknown");
  EXPECT_FALSE(cap.messages().empty());
}

TEST(Annotations, SymbolTable) {
  for (const char* s : {"N", "L", "R", "A", "a", "J", "S", "V", "F", "e", "j", "E", "/", "f", "Q", "+", "~", "|"}) {
    const int code = lsf::annotation_code(s);
    ASSERT_GT(code, 0) << s;
    EXPECT_EQ(lsf::annotation_symbol(code), s);
  }
  EXPECT_EQ(lsf::annotation_code("nope"), -1);
}

TEST(Annotations, SamplesNonDecreasingOnRandomStreams) {
  lsf::Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::uint8_t> bytes;
    const int n = 1 + static_cast<int>(rng.below(50));
    for (int k = 0; k < n; ++k) {
      const auto w = words({ann(1 + static_cast<int>(rng.below(40)), static_cast<int>(rng.below(1024)))});
      bytes.insert(bytes.end(), w.begin(), w.end());
    }
    bytes.push_back(0);
    bytes.push_back(0);
    lsf::WarningCapture quiet;
    const auto a = lsf::read_annotations(bytes);
    for (std::size_t i = 1; i < a.size(); ++i) EXPECT_LE(a[i - 1].sample, a[i].sample);
    EXPECT_EQ(lsf::read_annotations(bytes), a);
  }
}

TEST(Record, FixtureMatchesReferenceWriter) {
  const auto r = lsf::load_record(kFixtures, "fx212");
  EXPECT_EQ(r.n_signals(), 2);
  EXPECT_DOUBLE_EQ(r.header.sampling_rate, 360.0);
  ASSERT_EQ(r.n_samples(), 1000);
  std::ifstream in(kFixtures / "fx212_samples.txt");
  for (std::int64_t t = 0; t < 1000; ++t) {
    int a = 0, b = 0;
    in >> a >> b;
    ASSERT_EQ(r.at(t, 0), a) << t;
    ASSERT_EQ(r.at(t, 1), b) << t;
  }
  std::ifstream ain(kFixtures / "fx212_annotations.txt");
  std::size_t k = 0;
  for (std::string line; std::getline(ain, line); ++k) {
    std::istringstream ls(line);
    std::int64_t sample = 0;
    std::string sym, aux;
    ls >> sample >> sym >> aux;
    ASSERT_LT(k, r.annotations.size());
    EXPECT_EQ(r.annotations[k].sample, sample);
    EXPECT_EQ(r.annotations[k].symbol, sym);
    EXPECT_EQ(r.annotations[k].aux, aux == "-" ? "" : aux);
  }
  EXPECT_EQ(k, r.annotations.size());
}

TEST(Record, SingleSignal250WithSkip) {
  const auto r = lsf::load_record(kFixtures, "fx250");
  EXPECT_DOUBLE_EQ(r.header.sampling_rate, 250.0);
  ASSERT_EQ(r.n_samples(), 3000);
  std::ifstream in(kFixtures / "fx250_samples.txt");
  for (std::int64_t t = 0; t < 3000; ++t) {
    int a = 0;
    in >> a;
    ASSERT_EQ(r.at(t, 0), a);
  }
  ASSERT_EQ(r.annotations.size(), 2u);
  EXPECT_EQ(r.annotations[1].sample, 2500);
  EXPECT_EQ(r.annotations[1].aux, "(AFIB");
}

TEST(Record, AvailabilityAndDeterminism) {
  EXPECT_TRUE(lsf::record_available(kFixtures, "fx212"));
  EXPECT_FALSE(lsf::record_available(kFixtures, "absent"));
  EXPECT_EQ(lsf::load_record(kFixtures, "fx212"), lsf::load_record(kFixtures, "fx212"));
  EXPECT_THROW(lsf::load_record(kFixtures, "absent"), lsf::DataError);
}

TEST(Record, AnnotationsPastEndClamped) {
  lsf::RecordHeader h;
  h.record_name = "x";
  h.n_signals = 1;
  h.sampling_rate = 360;
  h.n_samples = 4;
  h.signals.resize(1);
  lsf::AnnotationEvent late;
  late.sample = 99;
  late.symbol = "N";
  lsf::WarningCapture cap;
  const auto r = lsf::assemble_record(h, {1, 2, 3, 4}, {late});
  EXPECT_EQ(r.annotations[0].sample, 3);
  EXPECT_FALSE(cap.messages().empty());
}

TEST(Interchange, RoundTripFixture) {
  auto r = lsf::load_record(kFixtures, "fx212");
  r.patient_id = "p 1%";
  EXPECT_EQ(lsf::import_interchange(lsf::export_interchange(r)), r);
}

TEST(Interchange, RoundTripWithoutAnnotations) {
  auto r = lsf::load_record(kFixtures, "fx250");
  r.annotations.clear();
  EXPECT_EQ(lsf::import_interchange(lsf::export_interchange(r)), r);
}

TEST(Interchange, HandWrittenFiveSamples) {
  const char* text =
      "LSF-INTERCHANGE 1\n"
      "record hand\n"
      "patient p7\n"
      "sampling_rate 360\n"
      "n_samples 5\n"
      "n_signals 2\n"
      "signal hand.dat 212 200 0 mV 12 0 0 0 MLII\n"
      "signal hand.dat 212 200 0 mV 12 0 0 0 V1\n"
      "samples\n"
      "1 -1\n2 -2\n3 -3\n4 -4\n5 2047\n"
      "annotations 1\n"
      "2 1 N 0 0 0 %\n"
      "end\n";
  const auto r = lsf::import_interchange(text);
  EXPECT_EQ(r.patient_id, "p7");
  ASSERT_EQ(r.n_samples(), 5);
  EXPECT_EQ(r.samples, (std::vector<std::int32_t>{1, -1, 2, -2, 3, -3, 4, -4, 5, 2047}));
  ASSERT_EQ(r.annotations.size(), 1u);
  EXPECT_EQ(r.annotations[0].sample, 2);
  EXPECT_EQ(r.annotations[0].aux, "");
}

TEST(Interchange, SchemaMismatchNamesLine) {
  try {
    lsf::import_interchange("LSF-INTERCHANGE 1\nrecord a\nbogus\n");
    FAIL();
  } catch (const lsf::ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}
