import pytest

from app.models.enums import DayPart, RelativeKind
from app.schemas.timeline import Duration, RelativeExpr, TimeWindow, Timestamp
from app.utils.exceptions import (
    EXIT_USAGE,
    MalformedTimestampException,
    NoCandidateException,
    OutOfRangeException,
    UnderflowException,
)
from app.utils.timeline import (
    add,
    daypart_of,
    find_timestamps,
    format_timestamp,
    insert_sorted_unique,
    parse_relative_expression,
    parse_timestamp,
    resolve_relative,
    subtract,
    truncate_at,
)


def test_random_timestamps_round_trip(rng):
    for _ in range(10_000):
        t = Timestamp(day=rng.randint(1, 999), seconds_of_day=rng.randint(0, 86399))
        assert parse_timestamp(format_timestamp(t)) == t


@pytest.mark.parametrize(
    "text,expected",
    [
        ("[DAY1 08:00:00]", Timestamp.at(1, 8)),
        ("[Day3, 14:05:09]", Timestamp.at(3, 14, 5, 9)),
        ("  [day12 23:59:59]  ", Timestamp.at(12, 23, 59, 59)),
    ],
)
def test_parse_accepts_variants(text, expected):
    assert parse_timestamp(text) == expected


def test_format_is_canonical():
    assert format_timestamp(Timestamp.at(2, 7, 3, 0)) == "[DAY2 07:03:00]"


@pytest.mark.parametrize(
    "text,offset",
    [
        ("[DAY1 8:00:00]", 6),
        ("DAY1 08:00:00", 0),
        ("[DAY1 08:00:00] trailing", 16),
        ("[DAY108:00:00]", 7),
    ],
)
def test_malformed_timestamps_report_byte_offset(text, offset):
    with pytest.raises(MalformedTimestampException) as caught:
        parse_timestamp(text)
    assert caught.value.offset == offset
    assert caught.value.exit_code == EXIT_USAGE


@pytest.mark.parametrize(
    "text,offset",
    [("[DAY0 10:00:00]", 4), ("[DAY1 24:00:00]", 6), ("[DAY1 10:60:00]", 9)],
)
def test_out_of_range_fields(text, offset):
    with pytest.raises(OutOfRangeException) as caught:
        parse_timestamp(text)
    assert caught.value.offset == offset


def test_ordering_is_day_then_second():
    assert Timestamp.at(1, 23, 59, 59) < Timestamp.at(2, 0, 0, 0)
    assert sorted([Timestamp.at(2), Timestamp.at(1, 5), Timestamp.at(1, 1)]) == [
        Timestamp.at(1, 1),
        Timestamp.at(1, 5),
        Timestamp.at(2),
    ]


def test_subtract_crosses_midnight():
    assert subtract(Timestamp.at(2, 1), Duration.of(hours=3)) == Timestamp.at(1, 22)


def test_add_crosses_midnight_and_inverts_subtract():
    later = add(Timestamp.at(1, 22), Duration.of(hours=3))
    assert later == Timestamp.at(2, 1)
    assert subtract(later, Duration.of(hours=3)) == Timestamp.at(1, 22)


def test_subtract_underflow():
    with pytest.raises(UnderflowException):
        subtract(Timestamp.at(1, 1), Duration.of(hours=2))


class TestResolveRelative:
    candidates = [Timestamp.at(1, 9), Timestamp.at(1, 15), Timestamp.at(2, 10)]

    def test_last_time_is_strictly_before(self):
        expr = RelativeExpr(kind=RelativeKind.LAST_TIME)
        assert resolve_relative(expr, Timestamp.at(2, 10), self.candidates) == Timestamp.at(1, 15)

    def test_last_time_without_candidates(self):
        expr = RelativeExpr(kind=RelativeKind.LAST_TIME)
        with pytest.raises(NoCandidateException):
            resolve_relative(expr, Timestamp.at(1, 9), self.candidates)

    def test_first_time(self):
        expr = RelativeExpr(kind=RelativeKind.FIRST_TIME)
        assert resolve_relative(expr, Timestamp.at(3), self.candidates) == Timestamp.at(1, 9)

    def test_yesterday_is_previous_day_window(self):
        expr = RelativeExpr(kind=RelativeKind.YESTERDAY)
        window = resolve_relative(expr, Timestamp.at(3, 12), [])
        assert window == TimeWindow(start=Timestamp.at(2), end=Timestamp.at(2, 23, 59, 59))

    def test_yesterday_on_day_one_underflows(self):
        with pytest.raises(UnderflowException):
            resolve_relative(RelativeExpr(kind=RelativeKind.YESTERDAY), Timestamp.at(1, 12), [])

    def test_hours_ago(self):
        expr = parse_relative_expression("what was I doing 3 hours ago?")
        assert expr.kind == RelativeKind.AGO
        assert resolve_relative(expr, Timestamp.at(2, 2), []) == Timestamp.at(1, 23)


@pytest.mark.parametrize(
    "text,kind",
    [
        ("Where did I go yesterday?", RelativeKind.YESTERDAY),
        ("When was the last time I cooked?", RelativeKind.LAST_TIME),
        ("When did I first time meet Bob?", RelativeKind.FIRST_TIME),
        ("What did I eat today?", RelativeKind.TODAY),
        ("Who called an hour ago?", RelativeKind.AGO),
    ],
)
def test_parse_relative_expression(text, kind):
    assert parse_relative_expression(text).kind == kind


def test_parse_relative_expression_none():
    assert parse_relative_expression("Where is the mug?") is None


@pytest.mark.parametrize(
    "clock,part",
    [
        ((5, 59), DayPart.NIGHT),
        ((6, 0), DayPart.MORNING),
        ((12, 0), DayPart.AFTERNOON),
        ((18, 0), DayPart.EVENING),
        ((23, 59), DayPart.EVENING),
    ],
)
def test_daypart_of(clock, part):
    assert daypart_of(Timestamp.at(1, *clock)) == part


def test_find_timestamps_skips_invalid():
    text = "Seen at [DAY1 08:00:00] and [Day2, 09:30:00], not [DAY0 10:00:00]."
    assert find_timestamps(text) == [Timestamp.at(1, 8), Timestamp.at(2, 9, 30)]


def test_insert_sorted_unique_and_truncate():
    timestamps = []
    for t in [Timestamp.at(2), Timestamp.at(1), Timestamp.at(2), Timestamp.at(3)]:
        insert_sorted_unique(timestamps, t)
    assert timestamps == [Timestamp.at(1), Timestamp.at(2), Timestamp.at(3)]
    assert truncate_at(timestamps, Timestamp.at(2)) == [Timestamp.at(1), Timestamp.at(2)]
