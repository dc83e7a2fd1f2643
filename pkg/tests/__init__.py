import os

TEST_DIR = os.path.dirname(__file__)
