"""
Author:
    Inspyre Softworks

Project:
    chns-fem

File:
    Scripts/app.py


Description:
    Launcher for the chns-fem command-line front end.
"""
import sys

from chns_fem.cli import main


if __name__ == '__main__':
    sys.exit(main())
