#include <gtest/gtest.h>

#include "test_support.hpp"
#include "unseen/digest.hpp"
#include "unseen/errors.hpp"
#include "unseen/perturb/catalog.hpp"
#include "unseen/perturb/utf8.hpp"

using namespace unseen;
using namespace unseen::perturb;

TEST(Utf8, RoundTripsMixedText) {
  const std::string text = "a\xC3\xA9\xE4\xB8\xAD\xF0\x9F\x98\x80z";
  const auto cps = decode_utf8(text);
  EXPECT_EQ(cps, (std::u32string{U'a', U'\u00E9', U'\u4E2D', U'\U0001F600', U'z'}));
  EXPECT_EQ(encode_utf8(cps), text);
}

TEST(Utf8, RejectsMalformedInput) {
  for (const std::string bad : {std::string("\xC3"), std::string("\xC0\xAF"), std::string("\xED\xA0\x80"),
                                std::string("\xF4\x90\x80\x80"), std::string("a\x80")}) {
    try {
      decode_utf8(bad);
      FAIL() << "accepted malformed bytes";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::InvalidUtf8);
    }
  }
}

TEST(Utf8, EscapeRoundTrip) {
  const std::u32string text = U"x\u200By\n\\z\U000E0041";
  const auto esc = escape_codepoints(text);
  for (char c : esc) EXPECT_TRUE(c == '\n' || (c >= 0x20 && c < 0x7F)) << esc;
  EXPECT_EQ(unescape_codepoints(esc), text);
  EXPECT_EQ(format_codepoint(U'\u200B'), "U+200B");
  EXPECT_EQ(format_codepoint(U'\U000E0041'), "U+E0041");
}

TEST(Catalog, BuiltinIsNonEmptyAndInvisible) {
  const auto& cat = InvisibleCatalog::builtin();
  ASSERT_GT(cat.size(), 300u);
  for (char32_t cp : cat.entries()) {
    EXPECT_FALSE(is_ascii_printable(cp));
    // Bidi embedding/override/isolate controls are excluded.
    EXPECT_FALSE((cp >= 0x202A && cp <= 0x202E) || (cp >= 0x2066 && cp <= 0x2069)) << format_codepoint(cp);
  }
  EXPECT_TRUE(cat.contains(U'\u200B'));
  EXPECT_EQ(cat.at(*cat.index_of(U'\u200B')), U'\u200B');
}

TEST(Catalog, ParseFormatAndDigest) {
  const auto cat = InvisibleCatalog::parse("# source: tiny\n\nU+200B\nu+200c  # trailing\nU+FEFF\n");
  EXPECT_EQ(cat.source_tag(), "tiny");
  EXPECT_EQ(cat.entries(), (std::vector<char32_t>{0x200B, 0x200C, 0xFEFF}));
  const auto again = InvisibleCatalog::parse(cat.to_file_text());
  EXPECT_EQ(again.entries(), cat.entries());
  EXPECT_EQ(again.digest(), cat.digest());
  EXPECT_EQ(cat.digest().size(), 64u);
  EXPECT_NE(cat.digest(), cat.restricted(2).digest());
}

TEST(Catalog, RejectsBadFiles) {
  for (const char* bad : {"U+0041\n", "U+200B\nU+200B\n", "200B\n", "U+ZZZZ\n", "U+D800\n", "U+110000\n"}) {
    try {
      InvisibleCatalog::parse(bad);
      FAIL() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::CatalogFormat) << bad;
    }
  }
}

TEST(Catalog, MissingFileIsIo) {
  try {
    InvisibleCatalog::load("/nonexistent/catalog.txt");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::Io);
  }
}

TEST(Catalog, RestrictedKeepsPrefix) {
  const auto& cat = InvisibleCatalog::builtin();
  const auto small = cat.restricted(8);
  ASSERT_EQ(small.size(), 8u);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(small.at(i), cat.at(i));
}

TEST(Catalog, StripCatalogRemovesOnlyMembers) {
  const auto& cat = InvisibleCatalog::builtin();
  EXPECT_EQ(strip_catalog(U"a\u200Bb\u00ADc", cat), U"abc");
  EXPECT_EQ(strip_catalog(U"plain", cat), U"plain");
}

TEST(Digest, KnownSha256) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}
