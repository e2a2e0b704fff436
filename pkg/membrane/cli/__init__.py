# Sub-commands of the membrane command line
from membrane.cli import probe, screen, simulate, sweep, units

# Every command module exposes register(subparsers)
commands = [
    simulate,
    sweep,
    units,
    probe,
    screen,
]
