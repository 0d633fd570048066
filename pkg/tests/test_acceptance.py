import pytest

from unfold_dynamics import acceptance


def test_quick_checks_pass():
    report = acceptance.run_suite(only=['splitting', 'residues', 'cauchy-heine', 'levels'])
    assert [c['name'] for c in report['checks']] == ['splitting', 'residues', 'cauchy-heine', 'levels']
    assert report['passed'], report['checks']
    assert report['summary'] == '4/4 checks passed'


def test_splitting_check_metrics():
    result = acceptance.run_check('splitting', acceptance.check_splitting, acceptance.QUICK, 0, 5000)
    assert result.status == acceptance.PASS
    assert result.seconds < 1.0


def test_levels_check_counts():
    result = acceptance.check_levels(acceptance.QUICK, None, 5000)
    assert result.metrics['levels'] == [2, 3]
    assert result.metrics['counts'] == {'2': 4, '3': 6}


def test_failures_become_results():
    def broken(sizes, rng, budget):
        acceptance.problem({'schema': 'unfold-problem/1', 'normal_form': {'curves': [{'gamma': [0]}]}})

    result = acceptance.run_check('broken', broken, acceptance.QUICK, 0, 5000)
    assert result.status == acceptance.FAIL
    assert 'error' in result.metrics


def test_report_without_timings():
    report = acceptance.run_suite(only=['levels'])
    stripped = acceptance.without_timings(report)
    assert 'seconds' not in stripped['checks'][0]
    assert stripped['summary'] == report['summary']


def test_limited_check_is_not_a_pass(monkeypatch):
    def limited(sizes, rng, budget):
        return acceptance.CheckResult('limited-one', 'never measured', acceptance.LIMITED, {})

    monkeypatch.setattr(acceptance, 'CHECKS', [('levels', acceptance.check_levels), ('limited-one', limited)])
    report = acceptance.run_suite()
    assert not report['passed']
    assert report['limited'] == ['limited-one']
    assert report['failed'] == []
    assert report['summary'] == '1/2 checks passed (limited-one limited)'


@pytest.mark.slow
def test_full_suite():
    report = acceptance.run_suite(full=True)
    statuses = {c['name']: c['status'] for c in report['checks']}
    assert all(status == acceptance.PASS for status in statuses.values()), statuses
    assert report['passed']
