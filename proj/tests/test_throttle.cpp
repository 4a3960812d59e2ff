#include "doctest.h"

#include "apac/throttle.hpp"

using namespace apac;

TEST_CASE("strategy parse and format round-trip") {
    ThrottleStrategy none = ThrottleStrategy::parse("none");
    CHECK(none.kind == ThrottleKind::Unlimited);
    CHECK(none.format() == "none");
    CHECK_FALSE(none.instruments());

    ThrottleStrategy count = ThrottleStrategy::parse("count:8");
    CHECK(count.kind == ThrottleKind::MaxCount);
    CHECK(count.limit == 8);
    CHECK(count.format() == "count:8");
    CHECK(count.instruments());

    ThrottleStrategy depth = ThrottleStrategy::parse("depth:3");
    CHECK(depth.kind == ThrottleKind::MaxDepth);
    CHECK(depth.limit == 3);
    CHECK(depth.format() == "depth:3");
    CHECK(depth.instruments());

    // depth:0 is a valid way to keep the pragmas but start inactive
    ThrottleStrategy zero = ThrottleStrategy::parse("depth:0");
    CHECK(zero.kind == ThrottleKind::MaxDepth);
    CHECK(zero.limit == 0);
}

TEST_CASE("strategy default is a depth limit of five") {
    ThrottleStrategy s;
    CHECK(s.kind == ThrottleKind::MaxDepth);
    CHECK(s.limit == 5);
    CHECK(s.format() == "depth:5");
}

TEST_CASE("malformed strategy text is rejected") {
    CHECK_THROWS_AS(ThrottleStrategy::parse(""), ApacError);
    CHECK_THROWS_AS(ThrottleStrategy::parse("bogus"), ApacError);
    CHECK_THROWS_AS(ThrottleStrategy::parse("count"), ApacError);
    CHECK_THROWS_AS(ThrottleStrategy::parse("count:"), ApacError);
    CHECK_THROWS_AS(ThrottleStrategy::parse("count:0"), ApacError);
    CHECK_THROWS_AS(ThrottleStrategy::parse("count:-2"), ApacError);
    CHECK_THROWS_AS(ThrottleStrategy::parse("depth:-1"), ApacError);
    CHECK_THROWS_AS(ThrottleStrategy::parse("depth:seven"), ApacError);
    CHECK_THROWS_AS(ThrottleStrategy::parse("width:4"), ApacError);
}

TEST_CASE("activation preamble per strategy") {
    GeneratedNames names;

    auto none = emit_activation_preamble(names, ThrottleStrategy::parse("none"));
    REQUIRE(none.size() == 1);
    CHECK(none[0] == "const bool apac_active = true;");

    auto count =
        emit_activation_preamble(names, ThrottleStrategy::parse("count:4"));
    REQUIRE(count.size() == 1);
    CHECK(count[0] == "const bool apac_active = apac_task_count < 4;");

    auto depth =
        emit_activation_preamble(names, ThrottleStrategy::parse("depth:5"));
    REQUIRE(depth.size() == 2);
    CHECK(depth[0] == "const int apac_depth_local = apac_depth;");
    CHECK(depth[1] == "const bool apac_active = apac_depth_local < 5;");
}

TEST_CASE("unit-level counters per strategy") {
    GeneratedNames names;

    CHECK(instrument_counters(names, ThrottleStrategy::parse("none")).empty());

    auto count = instrument_counters(names, ThrottleStrategy::parse("count:4"));
    REQUIRE(count.size() == 1);
    CHECK(count[0] == "int apac_task_count = 0;");

    auto depth = instrument_counters(names, ThrottleStrategy::parse("depth:2"));
    REQUIRE(depth.size() == 2);
    CHECK(depth[0] == "int apac_depth = 0;");
    CHECK(depth[1] == "#pragma omp threadprivate(apac_depth)");
}

TEST_CASE("task clause pieces per strategy") {
    GeneratedNames names;
    ThrottleStrategy none = ThrottleStrategy::parse("none");
    ThrottleStrategy count = ThrottleStrategy::parse("count:4");
    ThrottleStrategy depth = ThrottleStrategy::parse("depth:2");

    CHECK(activation_guard_clause(names, none).empty());
    CHECK(activation_guard_clause(names, count) == " if(apac_active)");
    CHECK(activation_guard_clause(names, depth) == " if(apac_active)");

    CHECK(extra_task_captures(names, none).empty());
    CHECK(extra_task_captures(names, count).empty());
    CHECK(extra_task_captures(names, depth) ==
          std::vector<std::string>{"apac_depth_local"});

    CHECK(pre_task_lines(names, none).empty());
    CHECK(pre_task_lines(names, depth).empty());
    auto inc = pre_task_lines(names, count);
    REQUIRE(inc.size() == 4);
    CHECK(inc[1] == "#pragma omp atomic");
    CHECK(inc[2] == "apac_task_count += 1;");

    CHECK(task_prologue_lines(names, none).empty());
    CHECK(task_prologue_lines(names, count).empty());
    auto pro = task_prologue_lines(names, depth);
    REQUIRE(pro.size() == 1);
    CHECK(pro[0] == "apac_depth = apac_depth_local + 1;");

    CHECK(task_epilogue_lines(names, none).empty());
    CHECK(task_epilogue_lines(names, depth).empty());
    auto dec = task_epilogue_lines(names, count);
    REQUIRE(dec.size() == 4);
    CHECK(dec[2] == "apac_task_count -= 1;");
}

TEST_CASE("renamed identifiers flow through every emitted line") {
    GeneratedNames names;
    names.active = "apac_active_2";
    names.depth = "apac_depth_3";
    names.depth_local = "apac_depth_local_2";
    names.task_count = "apac_task_count_9";

    ThrottleStrategy depth = ThrottleStrategy::parse("depth:1");
    auto pre = emit_activation_preamble(names, depth);
    CHECK(pre[0] == "const int apac_depth_local_2 = apac_depth_3;");
    CHECK(pre[1] == "const bool apac_active_2 = apac_depth_local_2 < 1;");
    CHECK(activation_guard_clause(names, depth) == " if(apac_active_2)");

    ThrottleStrategy count = ThrottleStrategy::parse("count:7");
    CHECK(emit_activation_preamble(names, count)[0] ==
          "const bool apac_active_2 = apac_task_count_9 < 7;");
    CHECK(pre_task_lines(names, count)[2] == "apac_task_count_9 += 1;");
}
