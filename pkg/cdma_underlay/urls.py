"""
URL configuration for cdma_underlay.

The only web surface is the admin, used to browse stored sweeps and
threshold calibrations.
"""
from django.contrib import admin
from django.urls import path

urlpatterns = [
    path('admin/', admin.site.urls),
]
