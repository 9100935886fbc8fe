def test_import():
    import bsd2dtn

    print(bsd2dtn)


def test_version_and_api():
    import bsd2dtn as bd

    assert isinstance(bd.__version__, str)
    names = ["eigensolve", "delta_report", "dtn_direct", "wave_formula", "run_checks"]
    for name in names:
        assert callable(getattr(bd, name))
    assert issubclass(bd.ConfigError, bd.Bsd2DtnError)
