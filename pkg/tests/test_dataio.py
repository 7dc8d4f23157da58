import re
from collections import Counter

import numpy as np
import pytest
from scipy import stats

from votelearn.dataio import (FIXTURES, Election, ElectionDataset, WeightedProfile, build_eval_dataset, dumps_dataset,
                              fixture_path, generate_dataset, loads_dataset, parse_strict_order, read_dataset,
                              read_strict_order, serialize_strict_order, subsample_election, write_dataset)
from votelearn.elections import ElectionSpec, make_rng
from votelearn.errors import InvalidParameterError, ParseError

EXAMPLE = "# NUMBER ALTERNATIVES: 3\n3: 1,2,3\n2: 2,1,3\n"


def test_spec_example():
    wp = parse_strict_order(EXAMPLE)
    assert wp.n_voters == 5 and len(wp.ballots) == 2
    assert wp.ballots[0] == (3, (0, 1, 2))


@pytest.mark.parametrize("line,what", [
    ("1: 1,1,2", "duplicate"),
    ("1: 1,2", "incomplete"),
    ("1: 1,2,4", "unknown"),
    ("x: 1,2,3", "multiplicity"),
    ("0: 1,2,3", "multiplicity"),
    ("1: 1,{2,3}", "tied"),
    ("1 1,2,3", "prefix"),
])
def test_errors_carry_line_numbers(line, what):
    with pytest.raises(ParseError, match=what) as exc:
        parse_strict_order("# NUMBER ALTERNATIVES: 3\n# comment\n" + line + "\n")
    assert exc.value.lineno == 3 and "line 3" in str(exc.value)


def test_header_checks():
    with pytest.raises(ParseError, match="before"):
        parse_strict_order("1: 1,2\n")
    with pytest.raises(ParseError, match="declares 4 voters"):
        parse_strict_order("# NUMBER ALTERNATIVES: 3\n# NUMBER VOTERS: 4\n" + EXAMPLE.split("\n", 1)[1])


def test_roundtrip_with_names():
    text = "# NUMBER ALTERNATIVES: 3\n# ALTERNATIVE NAME 1: tuna\n# ALTERNATIVE NAME 2: eel\n" \
           "# ALTERNATIVE NAME 3: egg\n  4 :3, 1,2\n1:1,2,3\n"
    wp = parse_strict_order(text)
    assert wp.names == ("tuna", "eel", "egg")
    out = serialize_strict_order(wp)
    assert parse_strict_order(out) == wp
    assert serialize_strict_order(parse_strict_order(out)) == out


def test_fixtures_parse():
    for name in FIXTURES:
        wp = read_strict_order(fixture_path(name))
        assert wp.m >= 3 and wp.n_voters >= 300
        assert parse_strict_order(serialize_strict_order(wp)) == wp


# ---------------------------------------------------------------- fuzzing

_DATA = re.compile(r"([1-9][0-9]*)\s*:(.*)\Z")


def reference_accepts(text: str, m: int, voters: int, unique: int) -> bool:
    """Independent validator for files whose metadata header is left intact."""
    total = count = 0
    for line in text.splitlines()[3:]:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        hit = _DATA.match(line)
        if hit is None:
            return False
        ids = [t.strip() for t in hit.group(2).split(",")]
        if not all(re.fullmatch(r"[1-9][0-9]*", t) for t in ids):
            return False
        ids = [int(t) for t in ids]
        if sorted(ids) != list(range(1, m + 1)):
            return False
        total += int(hit.group(1))
        count += 1
    return total == voters and count == unique


def random_file(rng):
    m = int(rng.integers(2, 7))
    rows = [(int(rng.integers(1, 20)), rng.permutation(m) + 1) for _ in range(int(rng.integers(1, 6)))]
    head = [f"# NUMBER ALTERNATIVES: {m}", f"# NUMBER VOTERS: {sum(r[0] for r in rows)}",
            f"# NUMBER UNIQUE ORDERS: {len(rows)}"]
    return head, [f"{mult}: " + ",".join(map(str, perm)) for mult, perm in rows], m, rows


ALPHABET = "0123456789,: {}x-\t"


def _edit_ids(s, rng, how):
    head, sep, body = s.partition(":")
    ids = body.split(",")
    if not sep or len(ids) < 2:
        return s
    how(ids)
    return head + ":" + ",".join(ids)


def mutate(lines, rng, m):
    lines = list(lines)
    i = int(rng.integers(len(lines)))
    s = lines[i]
    op = int(rng.integers(8))
    j = int(rng.integers(len(s) + 1))
    ch = ALPHABET[int(rng.integers(len(ALPHABET)))]
    if op == 0:  # delete a character
        s = s[:j] + s[j + 1:]
    elif op == 1:  # insert a character
        s = s[:j] + ch + s[j:]
    elif op == 2:  # replace a character
        s = s[:j] + ch + s[j + 1:]
    elif op == 3:  # swap two ids (still valid)
        def swap(ids):
            a, b = rng.choice(len(ids), 2, replace=False)
            ids[a], ids[b] = ids[b], ids[a]
        s = _edit_ids(s, rng, swap)
    elif op == 4:  # id out of range
        def out_of_range(ids):
            ids[int(rng.integers(len(ids)))] = str(m + int(rng.integers(1, 5)))
        s = _edit_ids(s, rng, out_of_range)
    elif op == 5:  # repeat an id in place of another
        def repeat(ids):
            ids[0] = ids[-1]
        s = _edit_ids(s, rng, repeat)
    elif op == 6:  # blank or comment line
        lines.insert(i + 1, "" if rng.random() < 0.5 else "# some remark")
    else:  # duplicate a whole line
        lines.insert(i, s)
    if op < 6:
        lines[i] = s
    return lines


def test_parser_fuzz_classification():
    rng = make_rng(2024, 11)
    accepted = rejected = 0
    for _ in range(10_000):
        head, body, m, rows = random_file(rng)
        for _ in range(int(rng.integers(1, 3))):
            body = mutate(body, rng, m)
        text = "\n".join(head + body) + "\n"
        expect = reference_accepts(text, m, sum(r[0] for r in rows), len(rows))
        try:
            wp = parse_strict_order(text)
        except ParseError as exc:
            assert not expect, text
            assert exc.lineno >= 1
            rejected += 1
        else:
            assert expect, text
            for _, ranking in wp.ballots:
                assert sorted(ranking) == list(range(m))
            accepted += 1
    # the corpus must exercise both sides
    assert accepted > 500 and rejected > 5000


# ---------------------------------------------------------------- sampling

def test_full_size_subsample_is_the_multiset():
    wp = parse_strict_order(EXAMPLE)
    p = subsample_election(wp, 5, make_rng(0))
    assert Counter(map(tuple, p.rank_order)) == Counter({(0, 1, 2): 3, (1, 0, 2): 2})
    with pytest.raises(InvalidParameterError):
        subsample_election(wp, 6, make_rng(0))


def test_single_ballot_gives_unanimity():
    wp = WeightedProfile(4, ((9, (2, 0, 3, 1)),))
    rng = make_rng(1)
    for n in (1, 4, 9):
        assert (subsample_election(wp, n, rng).rank_order == [2, 0, 3, 1]).all()


def test_size_one_frequencies():
    wp = parse_strict_order(EXAMPLE)
    rng = make_rng(7)
    draws = 10_000
    first = sum(subsample_election(wp, 1, rng).rank_order[0, 0] == 0 for _ in range(draws))
    sigma = np.sqrt(0.6 * 0.4 / draws)
    assert abs(first / draws - 0.6) <= 3 * sigma


def test_without_replacement():
    wp = WeightedProfile(3, ((1, (0, 1, 2)), (1, (1, 2, 0)), (1, (2, 0, 1))))
    rng = make_rng(3)
    for _ in range(200):
        p = subsample_election(wp, 3, rng)
        assert len({tuple(r) for r in p.rank_order}) == 3


def test_eval_dataset_n_uniform():
    wp = read_strict_order(fixture_path("sushi_like.soc"))
    ds = build_eval_dataset(wp, 10_000, (2, 20), make_rng(5))
    ns = np.array([e.rank_order.shape[0] for e in ds.elections])
    counts = np.bincount(ns, minlength=21)[2:]
    assert stats.chisquare(counts).pvalue > 1e-3
    assert all(e.rank_order.shape[1] == wp.m for e in ds.elections)


def test_eval_dataset_files(tmp_path):
    wp = parse_strict_order(EXAMPLE)
    empty = build_eval_dataset(wp, 0, (1, 5), make_rng(0), sink=tmp_path / "e.txt")
    assert len(empty) == 0 and len(read_dataset(tmp_path / "e.txt")) == 0
    assert "count=0" in (tmp_path / "e.txt").read_text().splitlines()[1]
    build_eval_dataset(wp, 30, (1, 5), make_rng(9), sink=tmp_path / "a.txt")
    build_eval_dataset(wp, 30, (1, 5), make_rng(9), sink=tmp_path / "b.txt")
    assert (tmp_path / "a.txt").read_bytes() == (tmp_path / "b.txt").read_bytes()
    assert read_dataset(tmp_path / "a.txt").elections[0].utilities is None


# ---------------------------------------------------------------- datasets

def test_dataset_roundtrip_bit_exact(tmp_path):
    ds = generate_dataset(ElectionSpec(2, 9, 2, 5, alpha0=0.3, seed=4), 40)
    write_dataset(tmp_path / "d.txt", ds)
    back = read_dataset(tmp_path / "d.txt")
    assert len(back) == 40 and back.meta["regime"] == ds.meta["regime"]
    for a, b in zip(ds.elections, back.elections):
        assert np.array_equal(a.rank_order, b.rank_order)
        assert a.utilities.tobytes() == b.utilities.tobytes()
    assert dumps_dataset(back) == dumps_dataset(ds)


def test_generation_is_per_election_stable():
    spec = ElectionSpec(2, 9, 2, 5, seed=8)
    short, long = generate_dataset(spec, 5), generate_dataset(spec, 10)
    assert dumps_dataset(ElectionDataset(long.elections[:5], short.meta)) == dumps_dataset(short)


def test_dataset_parse_errors():
    good = dumps_dataset(ElectionDataset([Election(np.array([[0, 1], [1, 0]]))], {}))
    assert len(loads_dataset(good)) == 1
    for bad in (good.replace("votelearn-elections 1", "elections 2"),
                good.replace("count=1", "count=2"),
                good.replace("1,0", "1,1"),
                good.rsplit("\n", 2)[0] + "\n"):
        with pytest.raises(ParseError):
            loads_dataset(bad)
