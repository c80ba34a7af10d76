import sys

if sys.version_info > (3,):
    def compat():
        return 1
else:
    def compat():
        return 2
