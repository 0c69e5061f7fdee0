#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "recur/cohort.hpp"
#include "recur/csv.hpp"

using namespace recur;

namespace {

Vector vec1(double x) {
  Vector v(1);
  v << x;
  return v;
}

Subject make_subject(std::string id, double censor, std::vector<Visit> visits) {
  Subject s;
  s.id = std::move(id);
  s.censor_time = censor;
  s.baseline.resize(0);
  s.visits = std::move(visits);
  return s;
}

}  // namespace

TEST_CASE("construction sorts visits by time with events first on ties") {
  Subject s = make_subject("a", 5.0,
                           {{3.0, VisitKind::nonevent, vec1(1)},
                            {1.0, VisitKind::event, vec1(2)},
                            {3.0, VisitKind::event, vec1(3)}});
  Cohort cohort({s}, {}, {"z"});
  const auto& v = cohort.subject(0).visits;
  REQUIRE(v.size() == 3);
  CHECK(v[0].time == 1.0);
  CHECK(v[1].time == 3.0);
  CHECK(v[1].kind == VisitKind::event);
  CHECK(v[2].time == 3.0);
  CHECK(v[2].kind == VisitKind::nonevent);
}

TEST_CASE("construction rejects malformed subjects") {
  const double nan = std::numeric_limits<double>::quiet_NaN();

  CHECK_THROWS_AS(Cohort({make_subject("a", 0.0, {})}, {}, {}), DataError);
  CHECK_THROWS_AS(Cohort({make_subject("a", -1.0, {})}, {}, {}), DataError);
  CHECK_THROWS_AS(Cohort({make_subject("a", std::numeric_limits<double>::infinity(), {})}, {}, {}),
                  DataError);

  // visit times must lie in (0, censor_time]
  CHECK_THROWS_AS(Cohort({make_subject("a", 5.0, {{0.0, VisitKind::event, vec1(1)}})}, {}, {"z"}),
                  DataError);
  CHECK_THROWS_AS(Cohort({make_subject("a", 5.0, {{5.5, VisitKind::event, vec1(1)}})}, {}, {"z"}),
                  DataError);
  CHECK_THROWS_AS(Cohort({make_subject("a", 5.0, {{nan, VisitKind::event, vec1(1)}})}, {}, {"z"}),
                  DataError);
  CHECK_NOTHROW(Cohort({make_subject("a", 5.0, {{5.0, VisitKind::event, vec1(1)}})}, {}, {"z"}));

  // at most one visit of each kind at a time
  CHECK_THROWS_AS(Cohort({make_subject("a", 5.0,
                                       {{1.0, VisitKind::event, vec1(1)},
                                        {1.0, VisitKind::event, vec1(2)}})},
                         {}, {"z"}),
                  DataError);
  CHECK_NOTHROW(Cohort({make_subject("a", 5.0,
                                     {{1.0, VisitKind::event, vec1(1)},
                                      {1.0, VisitKind::nonevent, vec1(2)}})},
                       {}, {"z"}));

  // ids unique and non-empty
  CHECK_THROWS_AS(Cohort({make_subject("a", 1.0, {}), make_subject("a", 2.0, {})}, {}, {}),
                  DataError);
  CHECK_THROWS_AS(Cohort({make_subject("", 1.0, {})}, {}, {}), DataError);

  // baseline must be finite and sized to the registry
  Subject bad_baseline = make_subject("a", 1.0, {});
  bad_baseline.baseline = vec1(nan);
  CHECK_THROWS_AS(Cohort({bad_baseline}, {"b"}, {}), DataError);
  Subject wrong_size = make_subject("a", 1.0, {});
  CHECK_THROWS_AS(Cohort({wrong_size}, {"b"}, {}), DataError);

  // visit covariates sized to the registry (NaN itself is allowed: unmeasured)
  CHECK_THROWS_AS(Cohort({make_subject("a", 5.0, {{1.0, VisitKind::event, Vector()}})}, {}, {"z"}),
                  DataError);
  CHECK_NOTHROW(Cohort({make_subject("a", 5.0, {{1.0, VisitKind::event, vec1(nan)}})}, {}, {"z"}));
}

TEST_CASE("tau defaults to the largest censoring time and clamps from above") {
  std::vector<Subject> subjects = {make_subject("a", 3.0, {}), make_subject("b", 5.0, {})};
  CHECK(Cohort(subjects, {}, {}).tau() == 5.0);
  CHECK(Cohort(subjects, {}, {}, 4.0).tau() == 4.0);
  CHECK(Cohort(subjects, {}, {}, 9.0).tau() == 5.0);
  CHECK(Cohort(subjects, {}, {}).max_censor_time() == 5.0);
  CHECK_THROWS_AS(Cohort(subjects, {}, {}, 0.0), DataError);
  CHECK_THROWS_AS(Cohort(subjects, {}, {}, -1.0), DataError);
}

TEST_CASE("registry lookups and visit counting") {
  Subject a = make_subject("a", 5.0,
                           {{1.0, VisitKind::event, vec1(1)},
                            {2.0, VisitKind::nonevent, vec1(2)},
                            {4.0, VisitKind::nonevent, vec1(3)}});
  a.baseline = vec1(0.25);
  Cohort cohort({a}, {"age"}, {"z"});

  CHECK(cohort.baseline_index("age") == 0);
  CHECK(cohort.baseline_index("missing") == -1);
  CHECK(cohort.visit_index("z") == 0);
  CHECK(cohort.visit_index("age") == -1);

  CHECK(cohort.total_visits() == 3);
  CHECK(cohort.count_visits(VisitKind::event, 5.0) == 1);
  CHECK(cohort.count_visits(VisitKind::nonevent, 5.0) == 2);
  CHECK(cohort.count_visits(VisitKind::nonevent, 2.0) == 1);  // boundary inclusive
  CHECK(cohort.count_visits(VisitKind::nonevent, 1.9) == 0);
}

TEST_CASE("counting_state uses strictly-prior history") {
  Subject a = make_subject("a", 5.0,
                           {{1.0, VisitKind::event, vec1(5)},
                            {2.0, VisitKind::nonevent, vec1(7)}});
  Cohort cohort({a}, {}, {"z"});
  const Subject& s = cohort.subject(0);

  CountingState at1 = counting_state(s, 1.0);
  CHECK(at1.events_before == 0);
  CHECK(at1.nonevents_before == 0);
  CHECK_FALSE(at1.last_visit_time.has_value());
  CHECK(at1.last_observed.size() == 0);

  CountingState at2 = counting_state(s, 2.0);  // the visit at t = 2 is excluded
  CHECK(at2.events_before == 1);
  CHECK(at2.nonevents_before == 0);
  CHECK(at2.last_visit_time == 1.0);
  CHECK(at2.last_observed[0] == 5.0);

  CountingState at3 = counting_state(s, 3.0);
  CHECK(at3.events_before == 1);
  CHECK(at3.nonevents_before == 1);
  CHECK(at3.last_visit_time == 2.0);
  CHECK(at3.last_observed[0] == 7.0);
}

TEST_CASE("resample keeps order and disambiguates duplicate ids") {
  std::vector<Subject> subjects = {make_subject("a", 3.0, {}), make_subject("b", 5.0, {})};
  Cohort cohort(subjects, {}, {}, 2.5);

  Cohort boot = cohort.resample({1, 0, 0});
  REQUIRE(boot.size() == 3);
  CHECK(boot.subject(0).id == "b");
  CHECK(boot.subject(1).id == "a");
  CHECK(boot.subject(2).id == "a#2");
  CHECK(boot.tau() == 2.5);

  CHECK_THROWS_AS(cohort.resample({2}), DataError);
}

TEST_CASE("csv load parses covariates, kinds, and missing cells") {
  std::istringstream subjects(
      "subject_id,censor_time,age\n"
      "s1,4.5,62\n"
      "s2,2.25,48\n");
  std::istringstream visits(
      "subject_id,time,kind,z,score\n"
      "s1,1.5,event,0.5,1\n"
      "s1,2,nonevent,,3\n"
      "s2,0.75,nonevent,-1,\n");
  Cohort cohort = load_cohort(subjects, visits);

  REQUIRE(cohort.size() == 2);
  CHECK(cohort.baseline_covariates() == std::vector<std::string>{"age"});
  CHECK(cohort.visit_covariates() == std::vector<std::string>({"z", "score"}));
  CHECK(cohort.subject(0).censor_time == 4.5);
  CHECK(cohort.subject(0).baseline[0] == 62.0);

  const auto& v1 = cohort.subject(0).visits;
  REQUIRE(v1.size() == 2);
  CHECK(v1[0].kind == VisitKind::event);
  CHECK(v1[0].covariates[0] == 0.5);
  CHECK(std::isnan(v1[1].covariates[0]));  // empty cell = unmeasured
  CHECK(v1[1].covariates[1] == 3.0);
  CHECK(std::isnan(cohort.subject(1).visits[0].covariates[1]));
}

TEST_CASE("csv load reports file and line on malformed input") {
  auto load = [](const std::string& s, const std::string& v) {
    std::istringstream ss(s), vs(v);
    return load_cohort(ss, vs);
  };
  const std::string good_subjects = "subject_id,censor_time\ns1,4\n";

  // bad kind value, with the visits file name and line number in the message
  try {
    load(good_subjects, "subject_id,time,kind\ns1,1,evnt\n");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("visits:2") != std::string::npos);
    CHECK(msg.find("evnt") != std::string::npos);
  }

  // non-numeric number, unknown subject, wrong header, short row, empty file
  CHECK_THROWS_AS(load("subject_id,censor_time\ns1,abc\n", "subject_id,time,kind\n"), DataError);
  CHECK_THROWS_AS(load(good_subjects, "subject_id,time,kind\nzz,1,event\n"), DataError);
  CHECK_THROWS_AS(load("id,censor_time\ns1,4\n", "subject_id,time,kind\n"), DataError);
  CHECK_THROWS_AS(load(good_subjects, "subject_id,time,kind\ns1,1\n"), DataError);
  CHECK_THROWS_AS(load("", "subject_id,time,kind\n"), DataError);

  // subjects cells must be finite numbers, not blanks
  CHECK_THROWS_AS(load("subject_id,censor_time,age\ns1,4,\n", "subject_id,time,kind\n"),
                  DataError);
}

TEST_CASE("csv save/load round-trips exactly, including unmeasured cells") {
  Subject a = make_subject("a", 4.0 / 3.0, {});
  a.baseline = vec1(0.1 + 0.2);  // not representable exactly in decimal
  a.visits = {{1.0 / 3.0, VisitKind::event, vec1(std::sqrt(2.0))},
              {1.0, VisitKind::nonevent, vec1(std::numeric_limits<double>::quiet_NaN())}};
  Subject b = make_subject("b", 9.0, {});
  b.baseline = vec1(-7.25e-12);
  Cohort original({a, b}, {"x0"}, {"z"}, 5.0);

  std::ostringstream subjects_out, visits_out;
  save_cohort(original, subjects_out, visits_out);
  std::istringstream subjects_in(subjects_out.str()), visits_in(visits_out.str());
  Cohort loaded = load_cohort(subjects_in, visits_in, original.tau());

  REQUIRE(loaded.size() == original.size());
  CHECK(loaded.tau() == original.tau());
  for (std::size_t i = 0; i < original.size(); ++i) {
    const Subject& lhs = original.subject(i);
    const Subject& rhs = loaded.subject(i);
    CHECK(lhs.id == rhs.id);
    CHECK(lhs.censor_time == rhs.censor_time);  // bitwise: %.17g round-trips
    CHECK(lhs.baseline == rhs.baseline);
    REQUIRE(lhs.visits.size() == rhs.visits.size());
    for (std::size_t k = 0; k < lhs.visits.size(); ++k) {
      CHECK(lhs.visits[k].time == rhs.visits[k].time);
      CHECK(lhs.visits[k].kind == rhs.visits[k].kind);
      for (Eigen::Index j = 0; j < lhs.visits[k].covariates.size(); ++j) {
        const double lv = lhs.visits[k].covariates[j];
        const double rv = rhs.visits[k].covariates[j];
        if (std::isnan(lv))
          CHECK(std::isnan(rv));
        else
          CHECK(lv == rv);
      }
    }
  }
}
