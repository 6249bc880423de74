#include <sstream>

#include "doctest.h"
#include "ktrace/dataset.hpp"
#include "ktrace/error.hpp"

using namespace ktrace;

namespace {

const char* kHeader = "student_id,skill_id,item_id,attempt_number,correct,order_index\n";

std::vector<InteractionRecord> parse(const std::string& body) {
    std::istringstream in(kHeader + body);
    return parse_interactions(in);
}

InteractionRecord rec(std::string student, std::string skill, std::string item, std::int64_t attempt, bool correct,
                      std::int64_t order) {
    return {std::move(student), std::move(skill), std::move(item), attempt, correct, order};
}

template <typename F>
ErrorKind kind_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::InvalidArgument;
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("header-only input parses to an empty list") { CHECK(parse("").empty()); }

TEST_CASE("a row maps field by field") {
    const auto records = parse("s1,ord,i1,1,1,0\n");
    REQUIRE(records.size() == 1);
    CHECK(records[0] == rec("s1", "ord", "i1", 1, true, 0));
}

TEST_CASE("columns are located by header name") {
    std::istringstream in("correct,order_index,student_id,skill_id,item_id,attempt_number\n0,3,s2,add,i9,2\n");
    const auto records = parse_interactions(in);
    REQUIRE(records.size() == 1);
    CHECK(records[0] == rec("s2", "add", "i9", 2, false, 3));
}

TEST_CASE("malformed interaction rows") {
    CHECK(kind_of([] { parse("s1,ord,i1,1,1,0\ns1,ord,i1,1,0,1\n"); }) == ErrorKind::DuplicateAttemptKey);
    CHECK(kind_of([] { parse("s1,ord,i1,1,yes,0\n"); }) == ErrorKind::BadBoolean);
    CHECK(kind_of([] { parse("s1,ord,i1,one,1,0\n"); }) == ErrorKind::BadNumber);
    CHECK(kind_of([] { parse("s1,ord,i1,1,1\n"); }) == ErrorKind::MissingColumn);
    std::istringstream no_col("student_id,skill_id,item_id,correct,order_index\n");
    CHECK(kind_of([&] { parse_interactions(no_col); }) == ErrorKind::MissingColumn);
}

TEST_CASE("error messages name the row") {
    try {
        parse("s1,ord,i1,1,1,0\ns1,ord,i2,1,maybe,1\n");
        FAIL("expected BadBoolean");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("row 2") != std::string::npos);
    }
}

TEST_CASE("first_attempts filters on attempt number") {
    const std::vector<InteractionRecord> mixed = {rec("s1", "a", "i1", 1, true, 0), rec("s1", "a", "i1", 2, true, 1),
                                                  rec("s1", "a", "i2", 1, false, 2),
                                                  rec("s1", "a", "i2", 3, true, 3)};
    const auto firsts = first_attempts(mixed);
    REQUIRE(firsts.size() == 2);
    CHECK(firsts[0] == mixed[0]);
    CHECK(firsts[1] == mixed[2]);

    const std::vector<InteractionRecord> all_first = {mixed[0], mixed[2]};
    CHECK(first_attempts(all_first) == all_first);

    const std::vector<InteractionRecord> none = {mixed[1], mixed[3]};
    CHECK(first_attempts(none).empty());
}

TEST_CASE("build_sequences sorts by order index and partitions by student") {
    const std::vector<InteractionRecord> records = {rec("s1", "b", "i3", 1, true, 7), rec("s1", "a", "i1", 1, false, 2),
                                                    rec("s1", "a", "i2", 1, true, 5)};
    const auto catalog = SkillCatalog::from_records(records);
    const auto seqs = build_sequences(records, catalog);
    REQUIRE(seqs.size() == 1);
    REQUIRE(seqs[0].steps.size() == 3);
    CHECK(seqs[0].steps[0].item_id == "i1");
    CHECK(seqs[0].steps[1].item_id == "i2");
    CHECK(seqs[0].steps[2].item_id == "i3");
    CHECK(seqs[0].steps[2].skill == catalog.index_of("b"));

    const std::vector<InteractionRecord> two = {rec("s2", "a", "i1", 1, true, 0), rec("s1", "a", "i1", 1, true, 0),
                                                rec("s2", "a", "i2", 1, false, 1)};
    const auto split = build_sequences(two, SkillCatalog::from_records(two));
    REQUIRE(split.size() == 2);
    CHECK(split[0].student_id == "s1");
    CHECK(split[0].steps.size() + split[1].steps.size() == two.size());
}

TEST_CASE("build_sequences preconditions") {
    const SkillCatalog catalog({"a"});
    const std::vector<InteractionRecord> unknown = {rec("s1", "zzz", "i1", 1, true, 0)};
    CHECK(kind_of([&] { build_sequences(unknown, catalog); }) == ErrorKind::UnknownSkill);
    const std::vector<InteractionRecord> retry = {rec("s1", "a", "i1", 2, true, 0)};
    CHECK(kind_of([&] { build_sequences(retry, catalog); }) == ErrorKind::NotFirstAttempt);
    const std::vector<InteractionRecord> clash = {rec("s1", "a", "i1", 1, true, 4), rec("s1", "a", "i2", 1, true, 4)};
    CHECK(kind_of([&] { build_sequences(clash, catalog); }) == ErrorKind::DuplicateOrderIndex);
}

TEST_CASE("skill catalog is sorted and dense") {
    const SkillCatalog catalog({"sequence", "addition", "ordering", "addition"});
    CHECK(catalog.size() == 3);
    CHECK(catalog.skill(0) == "addition");
    CHECK(catalog.index_of("sequence") == 2);
    CHECK(kind_of([&] { catalog.index_of("nope"); }) == ErrorKind::UnknownSkill);
}

TEST_CASE("skill_histories keeps chronological order per student") {
    const std::vector<InteractionRecord> records = {rec("s1", "a", "i1", 1, true, 0), rec("s1", "b", "i2", 1, false, 1),
                                                    rec("s1", "a", "i3", 1, false, 2),
                                                    rec("s2", "b", "i1", 1, true, 0)};
    const auto catalog = SkillCatalog::from_records(records);
    const auto seqs = build_sequences(records, catalog);
    const auto hist = skill_histories(seqs, catalog.index_of("a"));
    REQUIRE(hist.size() == 1);
    CHECK(hist[0].student_id == "s1");
    CHECK(hist[0].outcomes == std::vector<bool>{true, false});
    CHECK(hist[0].items == std::vector<std::string>{"i1", "i3"});
}

TEST_CASE("posttest parsing") {
    std::istringstream ok("student_id,skill_id,score\ns1,ord,0.71\n");
    const auto scores = parse_posttest(ok);
    REQUIRE(scores.find("s1", "ord").has_value());
    CHECK(*scores.find("s1", "ord") == 0.71);

    std::istringstream high("student_id,skill_id,score\ns1,ord,1.2\n");
    CHECK(kind_of([&] { parse_posttest(high); }) == ErrorKind::ScoreOutOfRange);

    std::istringstream empty("student_id,skill_id,score\n");
    CHECK(parse_posttest(empty).empty());

    std::istringstream dup("student_id,skill_id,score\ns1,ord,0.5\ns1,ord,0.6\n");
    CHECK(kind_of([&] { parse_posttest(dup); }) == ErrorKind::DuplicateKey);
}

TEST_CASE("writers round-trip through the parsers") {
    const std::vector<InteractionRecord> records = {rec("s1", "a", "a:1", 1, true, 0), rec("s2", "b", "b:1", 2, false, 9)};
    std::stringstream buf;
    write_interactions(buf, records);
    CHECK(parse_interactions(buf) == records);

    PosttestScores scores;
    scores.insert("s1", "a", 0.3);
    scores.insert("s2", "a", 1.0);
    std::stringstream pbuf;
    write_posttest(pbuf, scores);
    CHECK(parse_posttest(pbuf).entries() == scores.entries());
}

}  // TEST_SUITE
