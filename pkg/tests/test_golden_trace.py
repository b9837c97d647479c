"""Golden-file test freezing the trace format end to end."""

import helpers
from deladas import cli

EXPECTED = """\
0 boot seed=0 hosts=h1,h2,h3,h4,h5,h6
0 decision-resolve removed=-
0 install h1 file:///D:ClientBundle.xml
0 install h2 file:///D:ClientBundle.xml
0 install h3 http://deladas.org/RBundle.xml
0 install h4 http://deladas.org/RBundle.xml
0 install h5 file:///D:ClientBundle.xml
0 install h6 file:///D:ClientBundle.xml
0 instantiate Client@h1#0
0 instantiate Client@h2#0
0 instantiate Client@h5#0
0 instantiate Client@h6#0
0 instantiate Router@h3#0
0 instantiate Router@h4#0
0 wire Client@h1#0:in Router@h3#0:cout[0]
0 wire Client@h1#0:out Router@h3#0:cin[0]
0 wire Client@h2#0:in Router@h4#0:cout[0]
0 wire Client@h2#0:out Router@h4#0:cin[0]
0 wire Client@h5#0:in Router@h3#0:cout[1]
0 wire Client@h5#0:out Router@h3#0:cin[1]
0 wire Client@h6#0:in Router@h4#0:cout[1]
0 wire Client@h6#0:out Router@h4#0:cin[1]
0 wire Router@h3#0:rout[0] Router@h4#0:rin[0]
0 wire Router@h4#0:rout[0] Router@h3#0:rin[0]
10 crash-process Router@h3#0
10 amp-report h3 Router@h3#0
10 decision-restart Router@h3#0
10 instantiate Router@h3#0
10 wire Client@h1#0:in Router@h3#0:cout[0]
10 wire Client@h1#0:out Router@h3#0:cin[0]
10 wire Client@h5#0:in Router@h3#0:cout[1]
10 wire Client@h5#0:out Router@h3#0:cin[1]
10 wire Router@h3#0:rout[0] Router@h4#0:rin[0]
10 wire Router@h4#0:rout[0] Router@h3#0:rin[0]
"""


def test_process_failure_trace_is_golden(tmp_path):
    scenario = tmp_path / "s.scenario"
    scenario.write_text("at 10 crash-process Router@h3#0\n")
    trace = tmp_path / "trace.txt"
    code = cli.main([
        "run",
        "-r", str(helpers.SAMPLES / "resources.deladas"),
        "-c", str(helpers.SAMPLES / "constraints.deladas"),
        "--pins", str(helpers.SAMPLES / "example-deployment.xml"),
        "--scenario", str(scenario),
        "--trace", str(trace)])
    assert code == 0
    assert trace.read_text() == EXPECTED
