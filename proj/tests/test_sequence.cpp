#include <gtest/gtest.h>

#include <random>

#include "bctseg/sequence.hpp"

using namespace bctseg;

TEST(Fasta, SingleLine) {
    EXPECT_EQ(parse_fasta(">h\nACGT"), (std::vector<Symbol>{0, 1, 2, 3}));
}

TEST(Fasta, FoldedLines) {
    EXPECT_EQ(parse_fasta(">h\nAC\nGT"), (std::vector<Symbol>{0, 1, 2, 3}));
}

TEST(Fasta, LowercaseAndCrlf) {
    EXPECT_EQ(parse_fasta(">h desc\r\nacg\r\nt\r\n"), (std::vector<Symbol>{0, 1, 2, 3}));
}

TEST(Fasta, UnmappedSymbolReportsPosition) {
    try {
        parse_fasta(">h\nACGX");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        ASSERT_TRUE(e.offset().has_value());
        EXPECT_EQ(*e.offset(), 3u);
    }
}

TEST(Fasta, OnlyFirstRecord) {
    EXPECT_EQ(parse_fasta(">a\nAC\n>b\nTT\n"), (std::vector<Symbol>{0, 1}));
}

TEST(Fasta, EmptyRecord) {
    EXPECT_THROW(parse_fasta(">h\n\n"), ParseError);
    EXPECT_THROW(parse_fasta(""), ParseError);
}

TEST(Fasta, CustomMapping) {
    EXPECT_EQ(parse_fasta(">h\nTGCA", Alphabet::from_chars("TGCA")), (std::vector<Symbol>{0, 1, 2, 3}));
}

TEST(Plain, PerCharacter) {
    EXPECT_EQ(parse_plain("0101", Alphabet::numeric(2)), (std::vector<Symbol>{0, 1, 0, 1}));
}

TEST(Plain, PerLine) {
    EXPECT_EQ(parse_plain("2\n0\n1", Alphabet::numeric(3)), (std::vector<Symbol>{2, 0, 1}));
}

TEST(Plain, MultiCharacterLabelsPerLine) {
    EXPECT_EQ(parse_plain("10\n3\n", Alphabet::numeric(11)), (std::vector<Symbol>{10, 3}));
}

TEST(Plain, WrappedCharacters) {
    EXPECT_EQ(parse_plain("0110\n10\n", Alphabet::numeric(2)), (std::vector<Symbol>{0, 1, 1, 0, 1, 0}));
}

TEST(Plain, OutOfRange) {
    EXPECT_THROW(parse_plain("3", Alphabet::numeric(3)), ParseError);
}

TEST(Csv, FirstColumnWithHeader) {
    EXPECT_EQ(parse_csv("event,year\n0,1525\n1,1526\n\"1\",1527\n", Alphabet::numeric(2)),
              (std::vector<Symbol>{0, 1, 1}));
    EXPECT_THROW(parse_csv("event\n0\n2\n", Alphabet::numeric(2)), ParseError);
}

TEST(Alphabet, RejectsDuplicatesAndTinyAlphabets) {
    EXPECT_THROW(Alphabet({"a", "a"}), std::invalid_argument);
    EXPECT_THROW(Alphabet({"a"}), std::invalid_argument);
}

TEST(Alphabet, EncodeDecodeRoundTrip) {
    Alphabet a({"zero", "one", "x", "Y"});
    for (Symbol s = 0; s < a.size(); ++s) EXPECT_EQ(a.encode(a.decode(s)), s);
    EXPECT_FALSE(a.encode("two").has_value());
}

TEST(SplitContext, FirstDSymbolsBecomeContext) {
    std::vector<Symbol> raw{0, 1, 2, 0, 1};
    auto seq = split_context(raw, 2, Alphabet::numeric(3));
    EXPECT_EQ(std::vector<Symbol>(seq.context().begin(), seq.context().end()), (std::vector<Symbol>{0, 1}));
    EXPECT_EQ(std::vector<Symbol>(seq.observations().begin(), seq.observations().end()),
              (std::vector<Symbol>{2, 0, 1}));
    EXPECT_EQ(seq.n(), 3u);
    EXPECT_EQ(seq.at(1), 2);
}

TEST(SplitContext, GenomeLengthArithmetic) {
    std::vector<Symbol> raw(5243, 0);
    EXPECT_EQ(split_context(raw, 10, Alphabet::dna()).n(), 5233u);
}

TEST(SplitContext, NoObservationsLeft) {
    std::vector<Symbol> raw{0};
    EXPECT_THROW(split_context(raw, 1, Alphabet::numeric(2)), std::invalid_argument);
}

TEST(SplitContext, PreservesContentOnRandomInputs) {
    std::mt19937 gen(11);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t len = 2 + gen() % 40;
        const std::size_t depth = gen() % (len - 1);
        std::vector<Symbol> raw(len);
        for (auto& s : raw) s = static_cast<Symbol>(gen() % 4);
        auto seq = split_context(raw, depth, Alphabet::dna());
        EXPECT_EQ(std::vector<Symbol>(seq.full().begin(), seq.full().end()), raw);
        EXPECT_EQ(seq.context_length(), depth);
    }
}
