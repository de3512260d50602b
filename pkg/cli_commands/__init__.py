# This file makes the cli_commands directory a Python package
