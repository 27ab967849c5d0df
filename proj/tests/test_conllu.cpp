#include <doctest.h>

#include <sstream>

#include "layerscope/conllu.hpp"
#include "layerscope/errors.hpp"

using namespace layerscope;

namespace {

std::vector<ConlluSentence> parse(const std::string& text) {
  std::istringstream in(text);
  return parse_conllu(in);
}

std::size_t parse_error_line(const std::string& text) {
  try {
    parse(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  FAIL("expected a ParseError");
  return 0;
}

const char* kSixWords =
    "# sent_id = 1\n"
    "# text = The old dog barked loudly .\n"
    "1\tThe\tthe\tDET\tDT\t_\t3\tdet\t_\t_\n"
    "2\told\told\tADJ\tJJ\t_\t3\tamod\t_\t_\n"
    "3\tdog\tdog\tNOUN\tNN\t_\t4\tnsubj\t_\t_\n"
    "4\tbarked\tbark\tVERB\tVBD\t_\t0\troot\t_\t_\n"
    "5\tloudly\tloudly\tADV\tRB\t_\t4\tadvmod\t_\t_\n"
    "6\t.\t.\tPUNCT\t.\t_\t4\tpunct\t_\t_\n"
    "\n";

}  // namespace

TEST_CASE("two-word sentence has its root at word 2") {
  const auto sents = parse("1\tHe\the\tPRON\t_\t_\t2\tnsubj\t_\t_\n2\truns\trun\tVERB\t_\t_\t0\troot\t_\t_\n");
  REQUIRE(sents.size() == 1);
  CHECK(sents[0].tree.heads == std::vector<int>{2, 0});
  CHECK(sents[0].tree.root() == 1);
  CHECK(sents[0].forms == std::vector<std::string>{"He", "runs"});
}

TEST_CASE("six-word sentence matches the hand-read columns") {
  const auto sents = parse(kSixWords);
  REQUIRE(sents.size() == 1);
  const auto& t = sents[0].tree;
  CHECK(t.heads == std::vector<int>{3, 3, 4, 0, 4, 4});
  CHECK(t.upos == std::vector<std::string>{"DET", "ADJ", "NOUN", "VERB", "ADV", "PUNCT"});
  CHECK(t.deprels[5] == "punct");
  CHECK(sents[0].forms[3] == "barked");
}

TEST_CASE("multiword ranges and empty nodes are skipped") {
  const auto sents = parse(
      "1-2\tdel\t_\t_\t_\t_\t_\t_\t_\t_\n"
      "1\tde\tde\tADP\t_\t_\t2\tcase\t_\t_\n"
      "2\tel\tel\tDET\t_\t_\t0\troot\t_\t_\n"
      "2.1\tx\tx\tX\t_\t_\t_\t_\t_\t_\n\n");
  REQUIRE(sents.size() == 1);
  CHECK(sents[0].tree.n_words() == 2);
}

TEST_CASE("multiple sentences, with or without a trailing blank line") {
  std::string two = kSixWords;
  two += "1\tHi\thi\tINTJ\t_\t_\t0\troot\t_\t_";
  const auto sents = parse(two);
  REQUIRE(sents.size() == 2);
  CHECK(sents[1].tree.heads == std::vector<int>{0});
}

TEST_CASE("malformed input reports the offending line") {
  CHECK(parse_error_line("1\tHe\the\tPRON\t_\t_\t_\tnsubj\t_\t_\n") == 1);
  CHECK(parse_error_line("# c\n1\tHe\the\tPRON\t_\t_\t0\n") == 2);
  CHECK(parse_error_line("1\ta\ta\tX\t_\t_\t0\troot\t_\t_\n3\tb\tb\tX\t_\t_\t1\tdep\t_\t_\n") == 2);
  CHECK(parse_error_line("x\ta\ta\tX\t_\t_\t0\troot\t_\t_\n") == 1);
}

TEST_CASE("structurally invalid trees are rejected") {
  // Two roots.
  CHECK_THROWS_AS(parse("1\ta\ta\tX\t_\t_\t0\troot\t_\t_\n2\tb\tb\tX\t_\t_\t0\troot\t_\t_\n"), ParseError);
  // Cycle between 2 and 3.
  CHECK_THROWS_AS(parse("1\ta\ta\tX\t_\t_\t0\troot\t_\t_\n2\tb\tb\tX\t_\t_\t3\tdep\t_\t_\n"
                        "3\tc\tc\tX\t_\t_\t2\tdep\t_\t_\n"),
                  ParseError);
  // Head out of range.
  CHECK_THROWS_AS(parse("1\ta\ta\tX\t_\t_\t0\troot\t_\t_\n2\tb\tb\tX\t_\t_\t7\tdep\t_\t_\n"), ParseError);
  CHECK_THROWS_AS(validate_tree(DepTree{}), ShapeError);
}

TEST_CASE("write_conllu output parses back to the same sentences") {
  const auto sents = parse(kSixWords);
  std::ostringstream out;
  write_conllu(out, sents);
  const auto back = parse(out.str());
  REQUIRE(back.size() == 1);
  CHECK(back[0].forms == sents[0].forms);
  CHECK(back[0].tree.heads == sents[0].tree.heads);
  CHECK(back[0].tree.deprels == sents[0].tree.deprels);
  CHECK(back[0].tree.upos == sents[0].tree.upos);
}
