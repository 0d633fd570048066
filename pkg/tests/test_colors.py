from unfold_dynamics.colors import Colors


def test_outcome_colours(monkeypatch):
    for name in Colors.PALETTE:
        monkeypatch.setattr(Colors, name, f"<{name}>")
    assert Colors.outcome('pass') == '<OKGREEN>pass<ENDC>'
    assert Colors.outcome('limited') == '<WARNING>limited<ENDC>'
    assert Colors.outcome('homoclinic') == '<OKCYAN>homoclinic<ENDC>'
    assert Colors.outcome('rejected') == '<FAIL>rejected<ENDC>'


def test_disable_strips_codes(monkeypatch):
    for name in Colors.PALETTE:
        monkeypatch.setattr(Colors, name, getattr(Colors, name))
    Colors.disable()
    assert Colors.outcome('fail') == 'fail'
    assert all(getattr(Colors, name) == '' for name in Colors.PALETTE)
