import pytest


@pytest.fixture
def acceptance_report(request):
    """Emit one PASS/FAIL line per criterion through pytest's capture."""
    capman = request.config.pluginmanager.getplugin("capturemanager")

    def _report(number: int, ok: bool, detail: str):
        line = f"ACCEPTANCE {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        if capman is not None:
            with capman.global_and_fixture_disabled():
                print(line, flush=True)
        else:
            print(line, flush=True)
        assert ok, line

    return _report
