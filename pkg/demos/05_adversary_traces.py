"""Adversarial schedules and trace checking, in-process and over sockets.

The adversary controls the network: it can drop, duplicate, reorder, delay,
tamper with, or re-sign messages under its own key, but cannot forge
signatures.  Whatever it does, no trace may contain an Affected event
without the verification events that justify it.
"""

from oblivion.services import (
    Scenario,
    ScenarioStep,
    SocketTransport,
    build_world,
    check_censorship_resistance,
    format_scenario,
    honest_scenario,
    random_scenario,
    run_scenario,
    serve,
)


def show(title, scenario, world=None):
    print(f"=== {title} ===")
    print(format_scenario(scenario).rstrip())
    trace = run_scenario(scenario, world or build_world(scenario.seed))
    for event in trace:
        print("  " + event.line())
    print("violation:", check_censorship_resistance(trace))
    print()
    return trace


def main():
    show("honest run", honest_scenario())

    show("adversary duplicates the claim", Scenario(steps=(
        ScenarioStep(1, "alice", "ca", "REGISTER"),
        ScenarioStep(2, "alice", "ocp", "CLAIM/a1", mutation="duplicate"),
        ScenarioStep(3, "alice", "is", "REPORT/a1"),
    )))

    show("adversary swaps in its own key and re-signs", Scenario(steps=(
        ScenarioStep(1, "alice", "ca", "REGISTER"),
        ScenarioStep(2, "alice", "ocp", "CLAIM/a1", mutation="substitute-key"),
    )))

    print("=== 2000 random adversarial schedules ===")
    violations = 0
    for seed in range(2000):
        trace = run_scenario(random_scenario(seed), build_world(seed=3))
        if check_censorship_resistance(trace) is not None:
            violations += 1
    print(f"violations found: {violations}\n")

    print("=== same scenario over loopback sockets ===")
    world = build_world(seed=4)
    with serve(world.ocp) as ocp_server, serve(world.indexing) as is_server:
        transport = SocketTransport(ocp_server.address, is_server.address)
        socket_trace = run_scenario(honest_scenario(), world,
                                    transport=transport)
    in_process = run_scenario(honest_scenario(), build_world(seed=4))
    print("event sequences identical:",
          socket_trace.signature() == in_process.signature())


if __name__ == "__main__":
    main()
