from app.commands import ask, build, evaluate, export, generate, ingest, stats

COMMANDS = [ingest, build, ask, export, stats, generate, evaluate]


def register_commands(subparsers):
    for command in COMMANDS:
        command.register(subparsers)
